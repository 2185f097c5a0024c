#include "critscene/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace critscene {

MetricBundle metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn,
                                 std::uint64_t fn) {
  MetricBundle m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  const std::uint64_t total = tp + fp + tn + fn;
  m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  if (tp + fp) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    m.precision_undefined = true;
  }
  if (tp + fn) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    m.recall_undefined = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_undefined = true;
  }
  return m;
}

MetricBundle classification_metrics(std::span<const int> pred, std::span<const int> gold) {
  if (pred.size() != gold.size()) {
    throw std::invalid_argument("classification_metrics: " + std::to_string(pred.size()) +
                                " predictions for " + std::to_string(gold.size()) + " labels");
  }
  if (pred.empty()) throw std::invalid_argument("classification_metrics: empty input");
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gold[i] != 0;
    if (p && g) ++tp;
    else if (p) ++fp;
    else if (g) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

nlohmann::json metrics_to_json(const MetricBundle& m) {
  return {{"f1", m.f1},
          {"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn},
          {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined},
          {"f1_undefined", m.f1_undefined}};
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricBundle>>& rows) {
  std::size_t w = 5;
  for (const auto& [name, _] : rows) w = std::max(w, name.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s | %8s | %8s | %9s | %8s\n", static_cast<int>(w), "Model",
                "F1", "Accuracy", "Precision", "Recall");
  out << buf << std::string(w, '-') << "-+----------+----------+-----------+---------\n";
  for (const auto& [name, m] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s | %8.3f | %8.3f | %9.3f | %8.3f\n", static_cast<int>(w),
                  name.c_str(), m.f1, m.accuracy, m.precision, m.recall);
    out << buf;
  }
  return out.str();
}

// ------------------------------------------------------------- statements

std::string_view relation_phrase(Relation r) {
  switch (r) {
    case Relation::IsIn: return "is in";
    case Relation::Move: return "is moving";
    case Relation::Brake: return "is braking";
    case Relation::Stop: return "is stopped";
    case Relation::IndicateLeft: return "is indicating left";
    case Relation::IndicateRight: return "is indicating right";
    case Relation::TurnLeft: return "is turning left";
    case Relation::TurnRight: return "is turning right";
    case Relation::Cross: return "is crossing";
    case Relation::Red: return "is red";
    case Relation::Amber: return "is amber";
    case Relation::Green: return "is green";
    case Relation::MovingAway: return "is moving away from";
    case Relation::MovingTowards: return "is moving towards";
    case Relation::MustStop: return "must stop for";
    case Relation::NearCollision: return "is in near collision with";
    case Relation::Near: return "is near";
    case Relation::Visible: return "is visible to";
    case Relation::AvMove: return "performs AV-Move";
    case Relation::AvMoveLeft: return "performs AV-MoveLeft";
    case Relation::AvMoveRight: return "performs AV-MoveRight";
    case Relation::AvOvertake: return "performs AV-Overtake";
    case Relation::AvStop: return "performs AV-Stop";
    case Relation::AvTurnLeft: return "performs AV-TurnLeft";
    case Relation::AvTurnRight: return "performs AV-TurnRight";
    case Relation::CriticalityLink: return "has criticality";
  }
  return "?";
}

namespace {

constexpr std::string_view kEgo = "the ego-vehicle";

std::string entity_text(const Node& n) {
  if (n.cls == NodeClass::Ego) return std::string(kEgo);
  if (is_criticality_node(n.cls)) return std::string(to_string(n.cls));
  return std::string(to_string(n.cls)) + " " + std::to_string(n.track);
}

// Parses "<entity>" at the start of `s`; returns the consumed length.
std::optional<std::size_t> parse_entity(std::string_view s, NodeClass& cls, int& track,
                                        bool criticality_object) {
  if (s.substr(0, kEgo.size()) == kEgo) {
    cls = NodeClass::Ego;
    track = 0;
    return kEgo.size();
  }
  std::size_t end = 0;
  while (end < s.size() && s[end] != ' ' && s[end] != '.') ++end;
  const auto c = node_class_from_string(s.substr(0, end));
  if (!c) return std::nullopt;
  cls = *c;
  if (criticality_object) {
    if (!is_criticality_node(cls)) return std::nullopt;
    track = 0;
    return end;
  }
  if (is_criticality_node(cls) || end >= s.size() || s[end] != ' ') return std::nullopt;
  std::size_t p = end + 1, q = p;
  while (q < s.size() && s[q] >= '0' && s[q] <= '9') ++q;
  if (q == p || q - p > 9) return std::nullopt;
  track = std::stoi(std::string(s.substr(p, q - p)));
  return q;
}

}  // namespace

std::string edge_statement(const TemporalGraph& g, const Edge& e) {
  const Node& s = g.node(e.src);
  const Node& d = g.node(e.dst);
  const int time = static_cast<std::size_t>(e.tau) < g.frame_times.size()
                       ? g.frame_times[static_cast<std::size_t>(e.tau)]
                       : e.tau;
  std::string out = "At time " + std::to_string(time) + ": " + entity_text(s) + " " +
                    std::string(relation_phrase(e.relation));
  if (e.src != e.dst) out += " " + entity_text(d);
  out += ".";
  return out;
}

StatementSet graph_to_statements(const TemporalGraph& g) {
  StatementSet out;
  for (const auto& e : g.edges) out.insert(edge_statement(g, e));
  return out;
}

std::optional<StatementFact> parse_statement(std::string_view text) {
  constexpr std::string_view head = "At time ";
  if (text.substr(0, head.size()) != head) return std::nullopt;
  std::size_t p = head.size(), q = p;
  if (q < text.size() && text[q] == '-') ++q;
  const std::size_t digits = q;
  while (q < text.size() && text[q] >= '0' && text[q] <= '9') ++q;
  if (q == digits || q - p > 10 || text.substr(q, 2) != ": ") return std::nullopt;
  StatementFact f;
  f.time = std::stoi(std::string(text.substr(p, q - p)));
  std::string_view rest = text.substr(q + 2);

  const auto used = parse_entity(rest, f.src_cls, f.src_track, false);
  if (!used || *used >= rest.size() || rest[*used] != ' ') return std::nullopt;
  rest = rest.substr(*used + 1);

  // Longest phrase whose remainder is "." (self-loop) or " <entity>.".
  std::optional<StatementFact> best;
  std::size_t best_len = 0;
  for (Relation r : Ontology::relation_vocabulary()) {
    const std::string_view phrase = relation_phrase(r);
    if (rest.substr(0, phrase.size()) != phrase || phrase.size() <= best_len) continue;
    const std::string_view tail = rest.substr(phrase.size());
    StatementFact cand = f;
    cand.relation = r;
    if (tail == ".") {
      cand.dst_cls = cand.src_cls;
      cand.dst_track = cand.src_track;
    } else {
      if (tail.empty() || tail[0] != ' ') continue;
      const std::string_view obj = tail.substr(1);
      const auto n = parse_entity(obj, cand.dst_cls, cand.dst_track, r == Relation::CriticalityLink);
      if (!n || obj.substr(*n) != ".") continue;
    }
    best = cand;
    best_len = phrase.size();
  }
  return best;
}

double factual_correctness(const StatementSet& pred, const StatementSet& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  std::size_t tp = 0;
  for (const auto& s : pred) tp += gold.count(s);
  const std::size_t fp = pred.size() - tp;
  const std::size_t fn = gold.size() - tp;
  if (tp == 0) return 0.0;
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

namespace {

std::set<std::string> words(const StatementSet& s) {
  std::set<std::string> out;
  for (const auto& st : s) {
    std::istringstream in(st);
    std::string w;
    while (in >> w) {
      while (!w.empty() && (w.back() == '.' || w.back() == ':')) w.pop_back();
      if (!w.empty()) out.insert(w);
    }
  }
  return out;
}

}  // namespace

double token_jaccard(const StatementSet& pred, const StatementSet& gold) {
  const auto a = words(pred), b = words(gold);
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : a) inter += b.count(w);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

AnswerCorrectness answer_correctness(const StatementSet& pred, const StatementSet& gold,
                                     const SemanticScorer& scorer) {
  return {factual_correctness(pred, gold), scorer ? scorer(pred, gold) : 0.0};
}

// ---------------------------------------------------------------------- SCR

namespace {

void finish(ScrGroup& g) {
  if (g.total) g.rate = 100.0 * static_cast<double>(g.matched) / static_cast<double>(g.total);
}

}  // namespace

ScrReport scenario_consistency_rate(std::span<const std::pair<Criticality, Criticality>> results) {
  if (results.empty()) throw std::invalid_argument("scenario_consistency_rate: empty result list");
  ScrReport r;
  for (const auto& [requested, realized] : results) {
    ScrGroup& g = r.groups[static_cast<std::size_t>(requested)];
    ++g.total;
    ++r.overall.total;
    if (requested == realized) {
      ++g.matched;
      ++r.overall.matched;
    }
  }
  for (auto& g : r.groups) finish(g);
  finish(r.overall);
  return r;
}

nlohmann::json scr_to_json(const ScrReport& r) {
  const auto group = [](const ScrGroup& g) {
    return nlohmann::json{{"total", g.total},
                          {"matched", g.matched},
                          {"scr", g.rate ? nlohmann::json(*g.rate) : nlohmann::json()}};
  };
  nlohmann::json j;
  for (Criticality c : {Criticality::Visible, Criticality::Near, Criticality::NearCollision}) {
    j["groups"][std::string(to_string(c))] = group(r.groups[static_cast<std::size_t>(c)]);
  }
  j["overall"] = group(r.overall);
  return j;
}

std::string scr_table(const std::vector<std::pair<std::string, ScrReport>>& rows) {
  std::size_t w = 6;
  for (const auto& [name, _] : rows) w = std::max(w, name.size());
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s | %7s | %7s | %14s | %7s\n", static_cast<int>(w), "Policy",
                "Visible", "Near", "Near Collision", "Overall");
  out << buf << std::string(w, '-') << "-+---------+---------+----------------+--------\n";
  const auto cell = [](const ScrGroup& g) {
    char c[16];
    if (g.rate) {
      std::snprintf(c, sizeof c, "%.0f", *g.rate);
    } else {
      std::snprintf(c, sizeof c, "-");
    }
    return std::string(c);
  };
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s | %7s | %7s | %14s | %7s\n", static_cast<int>(w),
                  name.c_str(), cell(r.groups[0]).c_str(), cell(r.groups[1]).c_str(),
                  cell(r.groups[2]).c_str(), cell(r.overall).c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace critscene
