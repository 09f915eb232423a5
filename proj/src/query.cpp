#include "cardlab/query.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cardlab {

bool Query::references(const std::string& relation) const {
  return std::find(relations.begin(), relations.end(), relation) != relations.end();
}

std::vector<Selection> Query::selections_on(const std::string& relation) const {
  std::vector<Selection> out;
  for (const auto& sel : selections) {
    if (sel.column.relation == relation) out.push_back(sel);
  }
  return out;
}

void Query::validate(const DatabaseSchema& schema) const {
  if (relations.empty()) throw_data("E_DATA", "query references no relations");
  std::set<std::string> seen;
  for (const auto& name : relations) {
    if (schema.find_relation(name) == nullptr) {
      throw_data("E_DATA", "query references unknown relation '" + name + "'");
    }
    if (!seen.insert(name).second) {
      throw_data("E_DATA", "query references relation '" + name + "' twice");
    }
  }

  for (const auto& edge : join_predicates) {
    const bool known = std::any_of(schema.join_edges.begin(), schema.join_edges.end(),
                                   [&](const JoinEdge& e) { return e == edge; });
    if (!known) throw_data("E_DATA", "join predicate " + edge.str() + " is not a schema edge");
    if (!references(edge.fk.relation) || !references(edge.pk.relation)) {
      throw_data("E_DATA", "join predicate " + edge.str() + " touches unreferenced relations");
    }
  }

  // Connectivity of the referenced relations under the query's predicates.
  std::set<std::string> reached = {relations.front()};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& edge : join_predicates) {
      const bool has_fk = reached.count(edge.fk.relation) > 0;
      const bool has_pk = reached.count(edge.pk.relation) > 0;
      if (has_fk != has_pk) {
        reached.insert(has_fk ? edge.pk.relation : edge.fk.relation);
        grew = true;
      }
    }
  }
  if (reached.size() != relations.size()) {
    throw_data("E_DATA", "query relations are not connected by its join predicates");
  }

  std::set<std::string> predicated;
  for (const auto& sel : selections) {
    const bool eligible =
        std::any_of(schema.selection_columns.begin(), schema.selection_columns.end(),
                    [&](const ColumnRef& c) { return c == sel.column; });
    if (!eligible) {
      throw_data("E_DATA", "selection on " + sel.column.str() + " is not an eligible column");
    }
    if (!references(sel.column.relation)) {
      throw_data("E_DATA", "selection on " + sel.column.str() + " of unreferenced relation");
    }
    if (!predicated.insert(sel.column.str()).second) {
      throw_data("E_DATA", "duplicate selection on " + sel.column.str());
    }
  }
}

Query JoinSequence::to_query() const {
  Query q;
  for (const auto& step : steps) {
    q.relations.push_back(step.relation);
    for (const auto& sel : step.selections) q.selections.push_back(sel);
    if (step.join.has_value()) q.join_predicates.push_back(*step.join);
  }
  return q;
}

namespace {

using nlohmann::json;

json example_to_json(const LabeledExample& ex) {
  json doc;
  doc["relations"] = json::array();
  for (const auto& r : ex.query.relations) doc["relations"].push_back(r);
  doc["joins"] = json::array();
  for (const auto& e : ex.query.join_predicates) doc["joins"].push_back(e.str());
  doc["selections"] = json::array();
  for (const auto& s : ex.query.selections) {
    doc["selections"].push_back({{"column", s.column.str()}, {"threshold", s.threshold}});
  }
  doc["order"] = json::array();
  for (const auto& step : ex.sequence.steps) doc["order"].push_back(step.relation);
  if (ex.labeled()) {
    doc["cardinality"] = ex.cardinality;
    doc["selectivity"] = ex.selectivity;
    doc["prefix_selectivities"] = ex.prefix_selectivities;
  }
  return doc;
}

JoinEdge parse_edge(const std::string& text) {
  const size_t eq = text.find('=');
  if (eq == std::string::npos) throw_data("E_PARSE", "expected fk=pk join edge, got '" + text + "'");
  return JoinEdge{ColumnRef::parse(text.substr(0, eq)), ColumnRef::parse(text.substr(eq + 1))};
}

/// Rebuilds the left-deep sequence from the stored relation order: each step
/// takes the selections of its relation plus the unique tree predicate
/// connecting it to the relations before it.
JoinSequence sequence_from_order(const Query& q, const std::vector<std::string>& order) {
  if (order.size() != q.relations.size()) {
    throw_data("E_PARSE", "order length does not match relation count");
  }
  JoinSequence seq;
  std::set<std::string> placed;
  for (const auto& name : order) {
    SequenceStep step;
    step.relation = name;
    step.selections = q.selections_on(name);
    if (!placed.empty()) {
      std::vector<JoinEdge> connecting;
      for (const auto& edge : q.join_predicates) {
        const bool fk_new = edge.fk.relation == name && placed.count(edge.pk.relation) > 0;
        const bool pk_new = edge.pk.relation == name && placed.count(edge.fk.relation) > 0;
        if (fk_new || pk_new) connecting.push_back(edge);
      }
      if (connecting.size() != 1) {
        throw_data("E_PARSE", "order step '" + name + "' has " +
                                  std::to_string(connecting.size()) +
                                  " connecting predicates, expected exactly 1");
      }
      step.join = connecting.front();
    }
    placed.insert(name);
    seq.steps.push_back(step);
  }
  return seq;
}

LabeledExample example_from_json(const json& doc, const DatabaseSchema& schema) {
  LabeledExample ex;
  for (const auto& r : doc.at("relations")) ex.query.relations.push_back(r.get<std::string>());
  for (const auto& e : doc.at("joins")) ex.query.join_predicates.push_back(parse_edge(e));
  for (const auto& s : doc.at("selections")) {
    ex.query.selections.push_back(
        Selection{ColumnRef::parse(s.at("column").get<std::string>()), s.at("threshold")});
  }
  ex.query.validate(schema);
  std::vector<std::string> order;
  for (const auto& r : doc.at("order")) order.push_back(r.get<std::string>());
  ex.sequence = sequence_from_order(ex.query, order);
  if (doc.contains("cardinality")) {
    ex.cardinality = doc.at("cardinality").get<int64_t>();
    ex.selectivity = doc.at("selectivity").get<double>();
    if (doc.contains("prefix_selectivities")) {
      ex.prefix_selectivities = doc.at("prefix_selectivities").get<std::vector<double>>();
    }
  }
  return ex;
}

}  // namespace

std::string workload_to_jsonl(const std::vector<LabeledExample>& examples) {
  std::ostringstream out;
  for (const auto& ex : examples) out << example_to_json(ex).dump() << '\n';
  return out.str();
}

std::vector<LabeledExample> workload_from_jsonl_text(const std::string& text,
                                                     const DatabaseSchema& schema) {
  std::vector<LabeledExample> out;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw_data("E_PARSE", "workload line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      out.push_back(example_from_json(doc, schema));
    } catch (const json::exception& e) {
      throw_data("E_PARSE", "workload line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<LabeledExample> load_workload(const std::string& path, const DatabaseSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("E_IO", "cannot open workload file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return workload_from_jsonl_text(buffer.str(), schema);
}

void save_workload(const std::vector<LabeledExample>& examples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("E_IO", "cannot write workload file '" + path + "'");
  out << workload_to_jsonl(examples);
}

}  // namespace cardlab
