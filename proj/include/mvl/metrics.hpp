#pragma once

// The evaluation suite. Runs every corpus program through the candidate
// generator, the fixpoint, and the refutation engines — once with all rules,
// once per disabled rule — then aggregates rule quality (generality, hit
// rate, essentiality, influence) and engine behavior (jaccard overlap,
// throughput, speedup histograms). Everything timing-derived lives under a
// single "timing" subtree in the JSON report so golden-file comparisons can
// mask it; the rest is deterministic for a fixed seed and backend.

#include <array>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvl/orchestrator.hpp"
#include "mvl/rulegen.hpp"

namespace mvl {

enum class Outcome : uint8_t { Verified, Failed, Timeout };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Verified: return "verified";
    case Outcome::Failed: return "failed";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

inline Outcome outcome_of(VerdictKind k) {
  switch (k) {
    case VerdictKind::Valid: return Outcome::Verified;
    case VerdictKind::Failing: return Outcome::Failed;
    default: return Outcome::Timeout;  // genuine timeout or resource cap
  }
}

struct MetricsConfig {
  RuleConfig rules;
  CheckerConfig checker;
  DynConfig dyn;
  std::vector<EngineId> engines = {{EngineId::SBASE, 1},
                                   {EngineId::SSTEP, 1},
                                   {EngineId::LU, 1},
                                   {EngineId::DYN, 1}};
  bool parallel_config = true;          // also run DYN || SBASE || H
  double fast_threshold_seconds = 2.0;  // fast/slow split for speedup cells
};

struct EngineOutcome {
  std::set<int> refuted;
  double engine_seconds = 0.0;      // the engine alone
  double completion_seconds = 0.0;  // the whole engine-then-fixpoint run
  Outcome outcome = Outcome::Timeout;
};

struct DisabledOutcome {
  Outcome outcome = Outcome::Timeout;
  bool completed = false;  // fixpoint finished, so provability is recorded
  std::map<RuleId, int> emitted;
  std::map<RuleId, int> proved_of;
};

struct ProgramMetrics {
  std::string name;
  bool trivial = false;
  Outcome outcome = Outcome::Timeout;  // all rules enabled
  bool completed = false;
  int candidate_count = 0;
  int rounds = 0;
  std::set<int> proved;
  std::set<int> refuted_ids;  // the fixpoint's own refutation set
  double houdini_seconds = 0.0;
  std::map<RuleId, int> emitted;
  std::map<RuleId, int> proved_of;
  std::map<EngineId, EngineOutcome> engines;
  std::map<RuleId, DisabledOutcome> disabled;
  double parallel_seconds = -1.0;  // < 0 when the parallel config did not run
  Outcome parallel_outcome = Outcome::Timeout;
};

// Whole-program check with zero invariants: user invariants dropped, no
// candidates. Verifying under those conditions means no inference is needed.
// A timeout counts as non-trivial by convention.
inline bool classify_trivial(const Program& p, const CheckerConfig& cfg = {}) {
  Program stripped = p;
  struct Walker {
    void walk(std::vector<Stmt>& body) const {
      for (auto& st : body) {
        if (st.kind == StmtKind::While) {
          st.invariants.clear();
          walk(st.body);
        } else if (st.kind == StmtKind::If) {
          walk(st.body);
          walk(st.else_body);
        }
      }
    }
  };
  Walker{}.walk(stripped.body);
  CutProgram cut = cut_loops(stripped, {}, {});
  if (!cut.ok()) return false;
  return check_program(cut.program, cfg).kind == VerdictKind::Valid;
}

namespace detail {

inline std::map<RuleId, int> count_by_rule(const std::vector<Candidate>& cs) {
  std::map<RuleId, int> out;
  for (RuleId r : all_rules()) out[r] = 0;
  for (const auto& c : cs) ++out[c.rule];
  return out;
}

inline std::map<RuleId, int> proved_by_rule(const std::vector<Candidate>& cs,
                                            const std::set<int>& proved) {
  std::map<RuleId, int> out;
  for (RuleId r : all_rules()) out[r] = 0;
  for (const auto& c : cs)
    if (proved.count(c.id)) ++out[c.rule];
  return out;
}

}  // namespace detail

inline ProgramMetrics analyze_program(const std::string& name, const Program& p,
                                      const MetricsConfig& cfg = {}) {
  ProgramMetrics pm;
  pm.name = name;
  pm.trivial = classify_trivial(p, cfg.checker);

  auto candidates = generate_candidates(p, cfg.rules);
  pm.candidate_count = static_cast<int>(candidates.size());
  pm.emitted = detail::count_by_rule(candidates);

  HoudiniResult base = houdini_fixpoint(p, candidates, cfg.checker);
  pm.outcome = outcome_of(base.verdict_after.kind);
  pm.completed = pm.outcome != Outcome::Timeout;
  pm.rounds = base.rounds;
  pm.houdini_seconds = base.check_time;
  if (pm.completed) {
    pm.proved = base.proved;
    for (const auto& r : base.refuted) pm.refuted_ids.insert(r.candidate);
    pm.proved_of = detail::proved_by_rule(candidates, base.proved);
  }

  OrchestratorConfig ocfg;
  ocfg.checker = cfg.checker;
  ocfg.dyn = cfg.dyn;
  for (EngineId e : cfg.engines) {
    RunResult run = run_sequential({e}, p, candidates, ocfg);
    EngineOutcome eo;
    eo.refuted = run.per_engine.at(e).refuted;
    eo.engine_seconds = run.per_engine.at(e).duration;
    eo.completion_seconds = run.completion_time;
    eo.outcome = outcome_of(run.houdini.verdict_after.kind);
    pm.engines[e] = std::move(eo);
  }
  if (cfg.parallel_config) {
    RunResult run = run_parallel({{EngineId::DYN, 1}, {EngineId::SBASE, 1}}, p, candidates, ocfg);
    pm.parallel_seconds = run.completion_time;
    pm.parallel_outcome = outcome_of(run.houdini.verdict_after.kind);
  }

  for (RuleId r : all_rules()) {
    DisabledOutcome d;
    if (pm.emitted.at(r) == 0) {
      // the rule contributed nothing, so disabling it changes nothing
      d.outcome = pm.outcome;
      d.completed = pm.completed;
      d.emitted = pm.emitted;
      d.proved_of = pm.proved_of;
    } else {
      RuleConfig rc = cfg.rules;
      rc.enabled.erase(r);
      auto cs = generate_candidates(p, rc);
      HoudiniResult h = houdini_fixpoint(p, cs, cfg.checker);
      d.outcome = outcome_of(h.verdict_after.kind);
      d.completed = d.outcome != Outcome::Timeout;
      d.emitted = detail::count_by_rule(cs);
      if (d.completed) d.proved_of = detail::proved_by_rule(cs, h.proved);
    }
    pm.disabled[r] = std::move(d);
  }
  return pm;
}

// Programs are independent, so the corpus can run one program per worker;
// results land by index and aggregation happens after all joins.
inline std::vector<ProgramMetrics> analyze_corpus(
    const std::vector<std::pair<std::string, Program>>& corpus, const MetricsConfig& cfg = {},
    int workers = 1) {
  std::vector<ProgramMetrics> out(corpus.size());
  if (workers <= 1) {
    for (size_t i = 0; i < corpus.size(); ++i)
      out[i] = analyze_program(corpus[i].first, corpus[i].second, cfg);
    return out;
  }
  std::atomic<size_t> next{0};
  auto grind = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= corpus.size()) return;
      out[i] = analyze_program(corpus[i].first, corpus[i].second, cfg);
    }
  };
  std::vector<std::thread> pool;
  int n = std::min<int>(workers, static_cast<int>(corpus.size()));
  pool.reserve(n);
  for (int w = 0; w < n; ++w) pool.emplace_back(grind);
  for (auto& t : pool) t.join();
  return out;
}

// --------------------------------------------------------------------------
// Rule-quality aggregations.

struct GeneralityRow {
  int trivial_kernels = 0;
  int nontrivial_kernels = 0;
  int total() const { return trivial_kernels + nontrivial_kernels; }
};

// per rule: how many (trivial / non-trivial) programs had at least one of its
// candidates
inline std::map<RuleId, GeneralityRow> rule_generality(const std::vector<ProgramMetrics>& rs) {
  std::map<RuleId, GeneralityRow> out;
  for (RuleId r : all_rules()) out[r] = {};
  for (const auto& pm : rs)
    for (RuleId r : all_rules())
      if (pm.emitted.at(r) > 0) {
        if (pm.trivial)
          ++out[r].trivial_kernels;
        else
          ++out[r].nontrivial_kernels;
      }
  return out;
}

// per rule: provable candidates / emitted candidates as a percentage, over
// the programs whose provability is recorded; rules that emitted nothing
// report nullopt ("n/a")
inline std::map<RuleId, std::optional<double>> rule_hit_rate(
    const std::vector<ProgramMetrics>& rs) {
  std::map<RuleId, std::optional<double>> out;
  for (RuleId r : all_rules()) {
    long emitted = 0, proved = 0;
    for (const auto& pm : rs) {
      if (!pm.completed) continue;
      emitted += pm.emitted.at(r);
      proved += pm.proved_of.at(r);
    }
    out[r] = emitted == 0 ? std::nullopt
                          : std::optional<double>(100.0 * static_cast<double>(proved) /
                                                  static_cast<double>(emitted));
  }
  return out;
}

// per rule: programs that verify with every rule enabled but fail or time
// out with this rule disabled
inline std::map<RuleId, int> rule_essentiality(const std::vector<ProgramMetrics>& rs) {
  std::map<RuleId, int> out;
  for (RuleId r : all_rules()) out[r] = 0;
  for (const auto& pm : rs) {
    if (pm.outcome != Outcome::Verified) continue;
    for (RuleId r : all_rules())
      if (pm.disabled.at(r).outcome != Outcome::Verified) ++out[r];
  }
  return out;
}

// entry (r, s): programs where disabling r changed the hit rate of s. The
// emitted set of s is the same in both runs, so comparing proved counts is
// comparing hit rates exactly. Programs without provability recorded in both
// runs are skipped.
inline std::map<RuleId, std::map<RuleId, int>> rule_influence(
    const std::vector<ProgramMetrics>& rs) {
  std::map<RuleId, std::map<RuleId, int>> out;
  for (RuleId r : all_rules())
    for (RuleId s : all_rules())
      if (r != s) out[r][s] = 0;
  for (const auto& pm : rs) {
    if (!pm.completed) continue;
    for (RuleId r : all_rules()) {
      const auto& d = pm.disabled.at(r);
      if (!d.completed) continue;
      for (RuleId s : all_rules())
        if (r != s && d.proved_of.at(s) != pm.proved_of.at(s)) ++out[r][s];
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Engine comparisons.

// |a ∩ b| / |a ∪ b|; both empty -> nullopt ("n/a")
template <class T>
inline std::optional<double> jaccard(const std::set<T>& a, const std::set<T>& b) {
  size_t both = 0;
  for (const auto& x : a) both += b.count(x);
  size_t either = a.size() + b.size() - both;
  if (either == 0) return std::nullopt;
  return static_cast<double>(both) / static_cast<double>(either);
}

// refutation sets per engine across the corpus, as (program, candidate id)
// pairs; "H" is the fixpoint's own refutation set
inline std::map<std::string, std::set<std::pair<std::string, int>>> engine_refutation_sets(
    const std::vector<ProgramMetrics>& rs) {
  std::map<std::string, std::set<std::pair<std::string, int>>> out;
  out["H"] = {};
  for (const auto& pm : rs) {
    for (int id : pm.refuted_ids) out["H"].insert({pm.name, id});
    for (const auto& [e, eo] : pm.engines) {
      auto& s = out[engine_name(e)];
      for (int id : eo.refuted) s.insert({pm.name, id});
    }
  }
  return out;
}

// total refutations per second per engine, "H" included; a zero denominator
// is clamped to the clock granularity
inline std::map<std::string, double> throughput(const std::vector<ProgramMetrics>& rs) {
  std::map<std::string, double> out;
  double h_refs = 0, h_secs = 0;
  std::map<std::string, std::pair<double, double>> per;
  for (const auto& pm : rs) {
    h_refs += static_cast<double>(pm.refuted_ids.size());
    h_secs += pm.houdini_seconds;
    for (const auto& [e, eo] : pm.engines) {
      per[engine_name(e)].first += static_cast<double>(eo.refuted.size());
      per[engine_name(e)].second += eo.engine_seconds;
    }
  }
  constexpr double kGranularity = 1e-9;
  out["H"] = h_refs / std::max(h_secs, kGranularity);
  for (const auto& [name, rt] : per) out[name] = rt.first / std::max(rt.second, kGranularity);
  return out;
}

// --------------------------------------------------------------------------
// Speedup histograms.

inline const std::array<const char*, 5>& speedup_interval_names() {
  static const std::array<const char*, 5> names = {"(-inf,-2)", "[-2,-1)", "[1,1]", "(1,2]",
                                                   "(2,inf)"};
  return names;
}

// signed convention: speedups >= 1 positive, slowdowns reported as the
// negated inverse ratio; durations are clamped to clock granularity
inline double signed_speedup(double baseline, double config) {
  constexpr double kGranularity = 1e-9;
  baseline = std::max(baseline, kGranularity);
  config = std::max(config, kGranularity);
  if (baseline >= config) return baseline / config;
  return -(config / baseline);
}

// (-inf,-2) [-2,-1) [1,1] (1,2] (2,inf); the -2.0 boundary belongs to the
// closed bracket of [-2,-1)
inline int speedup_interval(double s) {
  if (s < -2.0) return 0;
  if (s < -1.0) return 1;
  if (s <= 1.0) return 2;
  if (s <= 2.0) return 3;
  return 4;
}

struct SpeedupHistogram {
  std::array<int, 5> fast{};  // baseline within the threshold
  std::array<int, 5> slow{};
};

namespace detail {

inline void speedup_count(SpeedupHistogram& h, double baseline, double config,
                          bool both_timeout, double threshold) {
  // programs timing out under both configurations are break-even by decree
  int cell = both_timeout ? 2 : speedup_interval(signed_speedup(baseline, config));
  if (baseline <= threshold)
    ++h.fast[cell];
  else
    ++h.slow[cell];
}

}  // namespace detail

// per configuration (each engine-then-fixpoint run, plus the parallel one):
// where each program's baseline-vs-config ratio lands
inline std::vector<std::pair<std::string, SpeedupHistogram>> speedup_report(
    const std::vector<ProgramMetrics>& rs, const MetricsConfig& cfg = {}) {
  std::vector<std::pair<std::string, SpeedupHistogram>> out;
  for (EngineId e : cfg.engines) {
    SpeedupHistogram h;
    for (const auto& pm : rs) {
      auto it = pm.engines.find(e);
      if (it == pm.engines.end()) continue;
      bool both = pm.outcome == Outcome::Timeout && it->second.outcome == Outcome::Timeout;
      detail::speedup_count(h, pm.houdini_seconds, it->second.completion_seconds, both,
                            cfg.fast_threshold_seconds);
    }
    out.emplace_back(engine_name(e) + ";H", h);
  }
  if (cfg.parallel_config) {
    SpeedupHistogram h;
    for (const auto& pm : rs) {
      if (pm.parallel_seconds < 0) continue;
      bool both = pm.outcome == Outcome::Timeout && pm.parallel_outcome == Outcome::Timeout;
      detail::speedup_count(h, pm.houdini_seconds, pm.parallel_seconds, both,
                            cfg.fast_threshold_seconds);
    }
    out.emplace_back("DYN||SBASE||H", h);
  }
  return out;
}

// --------------------------------------------------------------------------
// Report rendering.

namespace detail {

inline std::vector<std::string> engine_order(const std::vector<ProgramMetrics>& rs) {
  std::vector<std::string> names = {"H"};
  std::set<EngineId> seen;
  for (const auto& pm : rs)
    for (const auto& kv : pm.engines) seen.insert(kv.first);
  for (EngineId e : seen) names.push_back(engine_name(e));
  return names;
}

}  // namespace detail

inline nlohmann::ordered_json report_json(const std::vector<ProgramMetrics>& rs,
                                          const MetricsConfig& cfg = {}) {
  using json = nlohmann::ordered_json;
  json root;
  root["schema_version"] = 1;
  root["corpus_size"] = rs.size();

  json rules = json::array();
  for (RuleId r : all_rules())
    if (cfg.rules.enabled.count(r)) rules.push_back(rule_name(r));
  root["rules_enabled"] = std::move(rules);

  json engines = json::array();
  for (EngineId e : cfg.engines) engines.push_back(engine_name(e));
  root["engines"] = std::move(engines);

  json programs = json::array();
  for (const auto& pm : rs) {
    json p;
    p["name"] = pm.name;
    p["trivial"] = pm.trivial;
    p["outcome"] = outcome_name(pm.outcome);
    p["candidates"] = pm.candidate_count;
    p["rounds"] = pm.rounds;
    p["proved"] = pm.proved;
    p["refuted"] = pm.refuted_ids;
    json emitted;
    for (RuleId r : all_rules()) emitted[rule_name(r)] = pm.emitted.at(r);
    p["emitted"] = std::move(emitted);
    json proved_of;
    for (RuleId r : all_rules())
      proved_of[rule_name(r)] = pm.completed ? json(pm.proved_of.at(r)) : json(nullptr);
    p["proved_by_rule"] = std::move(proved_of);
    json engine_refuted;
    for (const auto& [e, eo] : pm.engines) engine_refuted[engine_name(e)] = eo.refuted;
    p["engine_refuted"] = std::move(engine_refuted);
    json disabled;
    for (RuleId r : all_rules()) disabled[rule_name(r)] = outcome_name(pm.disabled.at(r).outcome);
    p["disabled_outcome"] = std::move(disabled);
    programs.push_back(std::move(p));
  }
  root["programs"] = std::move(programs);

  json generality;
  for (const auto& [r, row] : rule_generality(rs)) {
    json g;
    g["trivial"] = row.trivial_kernels;
    g["nontrivial"] = row.nontrivial_kernels;
    g["total"] = row.total();
    generality[rule_name(r)] = std::move(g);
  }
  root["generality"] = std::move(generality);

  json hit;
  for (const auto& [r, rate] : rule_hit_rate(rs))
    hit[rule_name(r)] = rate ? json(*rate) : json(nullptr);
  root["hit_rate"] = std::move(hit);

  json ess;
  for (const auto& [r, n] : rule_essentiality(rs)) ess[rule_name(r)] = n;
  root["essentiality"] = std::move(ess);

  json influence;
  for (const auto& [r, row] : rule_influence(rs)) {
    json line;
    for (const auto& [s, n] : row) line[rule_name(s)] = n;
    influence[rule_name(r)] = std::move(line);
  }
  root["influence"] = std::move(influence);

  json jac = json::array();
  auto sets = engine_refutation_sets(rs);
  auto order = detail::engine_order(rs);
  for (size_t i = 0; i < order.size(); ++i)
    for (size_t j = i + 1; j < order.size(); ++j) {
      auto idx = jaccard(sets[order[i]], sets[order[j]]);
      json entry;
      entry["a"] = order[i];
      entry["b"] = order[j];
      entry["index"] = idx ? json(*idx) : json(nullptr);
      jac.push_back(std::move(entry));
    }
  root["jaccard"] = std::move(jac);

  json timing;
  json per_program;
  for (const auto& pm : rs) {
    json t;
    t["houdini_seconds"] = pm.houdini_seconds;
    for (const auto& [e, eo] : pm.engines) {
      t[engine_name(e) + "_seconds"] = eo.engine_seconds;
      t[engine_name(e) + ";H_seconds"] = eo.completion_seconds;
    }
    if (pm.parallel_seconds >= 0) t["DYN||SBASE||H_seconds"] = pm.parallel_seconds;
    per_program[pm.name] = std::move(t);
  }
  timing["per_program"] = std::move(per_program);
  json thr;
  for (const auto& [name, t] : throughput(rs)) thr[name] = t;
  timing["throughput"] = std::move(thr);
  json speed;
  speed["intervals"] = speedup_interval_names();
  for (const auto& [config, h] : speedup_report(rs, cfg)) {
    json cell;
    cell["fast"] = h.fast;
    cell["slow"] = h.slow;
    speed[config] = std::move(cell);
  }
  timing["speedup"] = std::move(speed);
  root["timing"] = std::move(timing);
  return root;
}

// influence matrix as CSV: one row per disabled rule, one column per
// affected rule, diagonal blank
inline std::string influence_csv(const std::vector<ProgramMetrics>& rs) {
  auto inf = rule_influence(rs);
  std::ostringstream out;
  out << "disabled";
  for (RuleId s : all_rules()) out << ',' << rule_name(s);
  out << '\n';
  for (RuleId r : all_rules()) {
    out << rule_name(r);
    for (RuleId s : all_rules()) {
      out << ',';
      if (r != s) out << inf.at(r).at(s);
    }
    out << '\n';
  }
  return out.str();
}

inline std::string report_text(const std::vector<ProgramMetrics>& rs,
                               const MetricsConfig& cfg = {}) {
  std::ostringstream out;
  out << std::fixed;
  out << "corpus: " << rs.size() << " programs\n\n";

  out << std::left << std::setw(12) << "program" << std::setw(10) << "outcome" << std::setw(9)
      << "trivial" << std::setw(11) << "candidates" << std::setw(8) << "proved"
      << "rounds\n";
  for (const auto& pm : rs)
    out << std::setw(12) << pm.name << std::setw(10) << outcome_name(pm.outcome) << std::setw(9)
        << (pm.trivial ? "yes" : "no") << std::setw(11) << pm.candidate_count << std::setw(8)
        << pm.proved.size() << pm.rounds << '\n';

  out << "\nrule      trivial  nontrivial  total  hit rate   essential\n";
  auto gen = rule_generality(rs);
  auto hit = rule_hit_rate(rs);
  auto ess = rule_essentiality(rs);
  for (RuleId r : all_rules()) {
    std::string rate = "n/a";
    if (hit.at(r)) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(1) << *hit.at(r) << '%';
      rate = cell.str();
    }
    out << std::setw(10) << rule_name(r) << std::setw(9) << gen.at(r).trivial_kernels
        << std::setw(12) << gen.at(r).nontrivial_kernels << std::setw(7) << gen.at(r).total()
        << std::setw(11) << rate << ess.at(r) << '\n';
  }

  out << "\njaccard overlap of refutation sets\n";
  auto sets = engine_refutation_sets(rs);
  auto order = detail::engine_order(rs);
  for (size_t i = 0; i < order.size(); ++i)
    for (size_t j = i + 1; j < order.size(); ++j) {
      auto idx = jaccard(sets[order[i]], sets[order[j]]);
      out << "  " << std::setw(6) << order[i] << " vs " << std::setw(6) << order[j] << "  ";
      if (idx)
        out << std::setprecision(3) << *idx << '\n';
      else
        out << "n/a\n";
    }

  out << "\nthroughput (refutations/second)\n";
  for (const auto& [name, t] : throughput(rs))
    out << "  " << std::setw(8) << name << std::setprecision(1) << t << '\n';

  out << "\nspeedup vs H (fast|slow per interval";
  out << "; fast = baseline <= " << std::setprecision(1) << cfg.fast_threshold_seconds << "s)\n";
  out << std::setw(16) << "config";
  for (const char* n : speedup_interval_names()) out << std::setw(11) << n;
  out << '\n';
  for (const auto& [config, h] : speedup_report(rs, cfg)) {
    out << std::setw(16) << config;
    for (int i = 0; i < 5; ++i) {
      std::string cell = std::to_string(h.fast[i]) + "|" + std::to_string(h.slow[i]);
      out << std::setw(11) << cell;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mvl
