#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "mvl/metrics.hpp"
#include "mvl/parser.hpp"

using namespace mvl;

namespace {

Program parse_ok(const std::string& text) {
  auto r = parse(text);
  REQUIRE(r.program.has_value());
  auto diags = typecheck(*r.program);
  REQUIRE(diags.empty());
  return *r.program;
}

// counting loop: user invariants carry the final assert, rules contribute
// bound and residue candidates on both variables
const char* kCount = R"(
kernel count width 6 {
  local i : bv;
  local j : bv;
  i := 0;
  j := 0;
  while (i < 10)
    invariant i <= 10;
    invariant j == 2 * i;
  {
    j := j + 2;
    i := i + 1;
  }
  assert j == 20;
}
)";

// down-counting loop whose pragma candidate props up a bound candidate: the
// bound is inductive only alongside the exact linear relation
const char* kMutual = R"(
kernel mutual width 6 {
  local i : bv;
  local j : bv;
  i := 0;
  j := 20;
  while (i < 10)
    candidate j == 20 - 2 * i;
  {
    j := j - 2;
    i := i + 1;
  }
  assert j <= 20;
}
)";

ProgramMetrics blank(const std::string& name) {
  ProgramMetrics pm;
  pm.name = name;
  pm.outcome = Outcome::Verified;
  pm.completed = true;
  for (RuleId r : all_rules()) {
    pm.emitted[r] = 0;
    pm.proved_of[r] = 0;
  }
  for (RuleId r : all_rules()) {
    DisabledOutcome d;
    d.outcome = pm.outcome;
    d.completed = true;
    d.emitted = pm.emitted;
    d.proved_of = pm.proved_of;
    pm.disabled[r] = d;
  }
  return pm;
}

int emitted_of(const ProgramMetrics& pm, RuleId r) { return pm.emitted.at(r); }

}  // namespace

TEST_CASE("jaccard matches hand-computed overlaps") {
  std::set<int> a = {1, 2}, b = {2, 3};
  auto j = jaccard(a, b);
  REQUIRE(j.has_value());
  REQUIRE(*j == Catch::Approx(1.0 / 3.0));
  REQUIRE(*jaccard(b, a) == Catch::Approx(*j));

  REQUIRE_FALSE(jaccard(std::set<int>{}, std::set<int>{}).has_value());
  REQUIRE(*jaccard(std::set<int>{1}, std::set<int>{2}) == 0.0);
  REQUIRE(*jaccard(a, a) == 1.0);
  REQUIRE(*jaccard(std::set<int>{}, a) == 0.0);

  std::set<std::pair<std::string, int>> p = {{"x", 1}, {"y", 2}};
  std::set<std::pair<std::string, int>> q = {{"y", 2}};
  REQUIRE(*jaccard(p, q) == Catch::Approx(0.5));
}

TEST_CASE("speedup ratios keep the signed convention") {
  REQUIRE(signed_speedup(4.0, 2.0) == Catch::Approx(2.0));
  REQUIRE(signed_speedup(2.0, 4.0) == Catch::Approx(-2.0));
  REQUIRE(signed_speedup(3.0, 3.0) == Catch::Approx(1.0));
  REQUIRE(signed_speedup(0.0, 0.0) == Catch::Approx(1.0));  // clamped, not NaN
  REQUIRE(signed_speedup(10.0, 4.0) == Catch::Approx(2.5));

  REQUIRE(speedup_interval(-2.1) == 0);
  REQUIRE(speedup_interval(-2.0) == 1);  // the documented boundary
  REQUIRE(speedup_interval(-1.5) == 1);
  REQUIRE(speedup_interval(1.0) == 2);
  REQUIRE(speedup_interval(1.5) == 3);
  REQUIRE(speedup_interval(2.0) == 3);
  REQUIRE(speedup_interval(2.5) == 4);
}

TEST_CASE("speedup histograms partition the corpus") {
  MetricsConfig cfg;
  cfg.engines = {{EngineId::SBASE, 1}};
  cfg.parallel_config = false;

  auto with_timing = [](const std::string& name, double base, double config,
                        bool timeout = false) {
    ProgramMetrics pm = blank(name);
    pm.houdini_seconds = base;
    EngineOutcome eo;
    eo.completion_seconds = config;
    eo.outcome = timeout ? Outcome::Timeout : Outcome::Verified;
    pm.engines[{EngineId::SBASE, 1}] = eo;
    if (timeout) {
      pm.outcome = Outcome::Timeout;
      pm.completed = false;
    }
    return pm;
  };

  std::vector<ProgramMetrics> rs = {
      with_timing("even", 1.0, 1.0),          // [1,1] fast
      with_timing("gain", 10.0, 4.0),         // (2,inf) slow
      with_timing("edge", 2.0, 4.0),          // -2.0 -> [-2,-1) fast
      with_timing("sink", 0.5, 2.0),          // (-inf,-2) fast
      with_timing("mild", 3.0, 2.0),          // (1,2] slow
      with_timing("stuck", 600, 600, true),   // both timeout -> [1,1] slow
  };

  auto report = speedup_report(rs, cfg);
  REQUIRE(report.size() == 1);
  REQUIRE(report[0].first == "SBASE;H");
  const SpeedupHistogram& h = report[0].second;

  int total = 0;
  for (int i = 0; i < 5; ++i) total += h.fast[i] + h.slow[i];
  REQUIRE(total == static_cast<int>(rs.size()));  // each program in one cell

  REQUIRE(h.fast[2] == 1);  // even
  REQUIRE(h.slow[4] == 1);  // gain
  REQUIRE(h.fast[1] == 1);  // edge, on the closed -2 bracket
  REQUIRE(h.fast[0] == 1);  // sink
  REQUIRE(h.slow[3] == 1);  // mild
  REQUIRE(h.slow[2] == 1);  // stuck, break-even by decree
}

TEST_CASE("aggregations on synthetic results match hand counts") {
  ProgramMetrics p1 = blank("p1");
  p1.emitted[RuleId::r9] = 4;
  p1.emitted[RuleId::r8] = 2;
  p1.proved_of[RuleId::r9] = 2;
  p1.proved_of[RuleId::r8] = 2;
  for (RuleId r : all_rules()) {
    p1.disabled[r].emitted = p1.emitted;
    p1.disabled[r].proved_of = p1.proved_of;
  }
  p1.disabled[RuleId::r9].outcome = Outcome::Failed;  // essential
  p1.disabled[RuleId::r9].emitted[RuleId::r9] = 0;
  p1.disabled[RuleId::r9].proved_of[RuleId::r9] = 0;
  p1.disabled[RuleId::r8].emitted[RuleId::r8] = 0;
  p1.disabled[RuleId::r8].proved_of[RuleId::r8] = 0;
  p1.disabled[RuleId::r8].proved_of[RuleId::r9] = 1;  // influence r8 -> r9

  ProgramMetrics p2 = blank("p2");
  p2.trivial = true;
  p2.emitted[RuleId::r8] = 1;
  p2.proved_of[RuleId::r8] = 1;
  for (RuleId r : all_rules()) {
    p2.disabled[r].emitted = p2.emitted;
    p2.disabled[r].proved_of = p2.proved_of;
  }

  ProgramMetrics p3 = blank("p3");  // timed out: no provability recorded
  p3.outcome = Outcome::Timeout;
  p3.completed = false;
  p3.emitted[RuleId::r9] = 5;
  for (RuleId r : all_rules()) {
    p3.disabled[r].outcome = Outcome::Timeout;
    p3.disabled[r].completed = false;
  }

  std::vector<ProgramMetrics> rs = {p1, p2, p3};

  auto gen = rule_generality(rs);
  REQUIRE(gen.at(RuleId::r9).nontrivial_kernels == 2);  // p1 and p3
  REQUIRE(gen.at(RuleId::r9).trivial_kernels == 0);
  REQUIRE(gen.at(RuleId::r8).trivial_kernels == 1);
  REQUIRE(gen.at(RuleId::r8).nontrivial_kernels == 1);
  REQUIRE(gen.at(RuleId::r8).total() == 2);
  REQUIRE(gen.at(RuleId::r0).total() == 0);

  auto hit = rule_hit_rate(rs);
  REQUIRE(*hit.at(RuleId::r9) == Catch::Approx(50.0));   // p3 excluded
  REQUIRE(*hit.at(RuleId::r8) == Catch::Approx(100.0));  // (2+1)/(2+1)
  REQUIRE_FALSE(hit.at(RuleId::r0).has_value());

  auto ess = rule_essentiality(rs);
  REQUIRE(ess.at(RuleId::r9) == 1);  // p1 only; p3 never verified
  REQUIRE(ess.at(RuleId::r8) == 0);

  auto inf = rule_influence(rs);
  REQUIRE(inf.at(RuleId::r8).at(RuleId::r9) == 1);
  REQUIRE(inf.at(RuleId::r9).at(RuleId::r8) == 0);
  REQUIRE(inf.at(RuleId::r9).count(RuleId::r9) == 0);  // no diagonal
}

TEST_CASE("throughput clamps zero durations") {
  ProgramMetrics pm = blank("p");
  pm.refuted_ids = {7};
  pm.houdini_seconds = 0.5;
  EngineOutcome eo;
  eo.refuted = {1, 2};
  eo.engine_seconds = 0.0;
  pm.engines[{EngineId::SBASE, 1}] = eo;

  auto t = throughput({pm});
  REQUIRE(t.at("H") == Catch::Approx(2.0));
  REQUIRE(std::isfinite(t.at("SBASE")));
  REQUIRE(t.at("SBASE") > 0.0);
}

TEST_CASE("influence csv lays out the matrix") {
  ProgramMetrics p1 = blank("p1");
  p1.emitted[RuleId::r9] = 4;
  p1.emitted[RuleId::r8] = 2;
  p1.proved_of[RuleId::r9] = 2;
  for (RuleId r : all_rules()) {
    p1.disabled[r].emitted = p1.emitted;
    p1.disabled[r].proved_of = p1.proved_of;
  }
  p1.disabled[RuleId::r8].proved_of[RuleId::r9] = 1;

  std::string csv = influence_csv({p1});
  REQUIRE(csv.find("disabled,pragma,r0,r1,r2,r3,r8,r9,r10,r12,r13,r14,r15,r17\n") == 0);
  REQUIRE(csv.find("\nr8,0,0,0,0,0,,1,0,0,0,0,0,0\n") != std::string::npos);
  REQUIRE(csv.find("\npragma,,0,0,0,0,0,0,0,0,0,0,0,0\n") != std::string::npos);
}

TEST_CASE("trivial classification separates empty and needed invariants") {
  REQUIRE(classify_trivial(parse_ok(R"(
kernel idle width 4 {
  local i : bv;
  i := 0;
  while (i < 3) {
    i := i + 1;
  }
}
)")));
  REQUIRE(classify_trivial(parse_ok(R"(
kernel pure width 4 {
  param a : bv;
  param b : bv;
  assert (a & b) <= (a | b);
}
)")));
  REQUIRE_FALSE(classify_trivial(parse_ok(kCount)));
}

TEST_CASE("the counting loop hits the catalog example rates") {
  ProgramMetrics pm = analyze_program("count", parse_ok(kCount));

  REQUIRE_FALSE(pm.trivial);
  REQUIRE(pm.outcome == Outcome::Verified);
  REQUIRE(pm.completed);
  REQUIRE(pm.candidate_count == 8);
  REQUIRE(pm.proved.size() == 6);
  REQUIRE(pm.refuted_ids == std::set<int>{3, 5});  // i <= 0 and j <= 0

  auto hit = rule_hit_rate({pm});
  REQUIRE(*hit.at(RuleId::r8) == Catch::Approx(100.0));
  REQUIRE(*hit.at(RuleId::r9) == Catch::Approx(50.0));
  REQUIRE(*hit.at(RuleId::r10) == Catch::Approx(100.0));
  REQUIRE_FALSE(hit.at(RuleId::r1).has_value());

  // every proved candidate belongs to exactly one rule
  int sum = 0;
  for (RuleId r : all_rules()) sum += pm.proved_of.at(r);
  REQUIRE(sum == static_cast<int>(pm.proved.size()));

  // the user invariants carry the proof, so no rule is essential here
  auto ess = rule_essentiality({pm});
  for (RuleId r : all_rules()) REQUIRE(ess.at(r) == 0);

  // engine views of the same pool
  REQUIRE(pm.engines.at({EngineId::SBASE, 1}).refuted.empty());
  REQUIRE(pm.engines.at({EngineId::SSTEP, 1}).refuted == pm.refuted_ids);
  REQUIRE(pm.engines.at({EngineId::LU, 1}).refuted.empty());
  REQUIRE(pm.engines.at({EngineId::DYN, 1}).refuted == pm.refuted_ids);
  for (const auto& [e, eo] : pm.engines) REQUIRE(eo.outcome == Outcome::Verified);
  REQUIRE(pm.parallel_seconds >= 0.0);
  REQUIRE(pm.parallel_outcome == Outcome::Verified);

  // disabling a rule removes that rule's candidates and nothing else
  for (RuleId r : all_rules()) {
    const DisabledOutcome& d = pm.disabled.at(r);
    REQUIRE(d.emitted.at(r) == 0);
    for (RuleId s : all_rules())
      if (s != r) REQUIRE(d.emitted.at(s) == emitted_of(pm, s));
    if (d.completed && pm.completed)
      for (RuleId s : all_rules()) REQUIRE(d.proved_of.at(s) <= pm.proved_of.at(s));
  }
}

TEST_CASE("a mutually inductive pair shows up as influence") {
  ProgramMetrics pm = analyze_program("mutual", parse_ok(kMutual));

  REQUIRE(pm.outcome == Outcome::Verified);
  REQUIRE(pm.candidate_count == 8);
  REQUIRE(pm.refuted_ids == std::set<int>{4, 5});  // i <= 0 and 20 <= j
  REQUIRE(pm.proved.count(0) == 1);                // the pragma relation
  REQUIRE(pm.proved.count(6) == 1);                // j <= 20 rides on it

  // without the pragma the bound cannot stand, with it the proof closes
  REQUIRE(pm.disabled.at(RuleId::pragma).outcome == Outcome::Failed);
  REQUIRE(pm.disabled.at(RuleId::r9).outcome == Outcome::Failed);
  REQUIRE(pm.disabled.at(RuleId::r8).outcome == Outcome::Verified);
  REQUIRE(pm.disabled.at(RuleId::r10).outcome == Outcome::Verified);

  auto ess = rule_essentiality({pm});
  REQUIRE(ess.at(RuleId::pragma) == 1);
  REQUIRE(ess.at(RuleId::r9) == 1);
  REQUIRE(ess.at(RuleId::r8) == 0);

  auto inf = rule_influence({pm});
  REQUIRE(inf.at(RuleId::pragma).at(RuleId::r9) == 1);
  REQUIRE(inf.at(RuleId::r9).at(RuleId::pragma) == 0);
  REQUIRE(inf.at(RuleId::r8).at(RuleId::r9) == 0);

  // disabling one rule never improves another
  for (RuleId r : all_rules()) {
    const DisabledOutcome& d = pm.disabled.at(r);
    if (!d.completed) continue;
    for (RuleId s : all_rules()) REQUIRE(d.proved_of.at(s) <= pm.proved_of.at(s));
  }
}

TEST_CASE("the json report isolates timing and stays deterministic") {
  Program p = parse_ok(kCount);
  auto one = report_json({analyze_program("count", p)});
  auto two = report_json({analyze_program("count", p)});

  REQUIRE(one["schema_version"] == 1);
  REQUIRE(one["corpus_size"] == 1);
  REQUIRE(one["hit_rate"]["r9"] == Catch::Approx(50.0));
  REQUIRE(one["hit_rate"]["r1"].is_null());
  REQUIRE(one["programs"][0]["name"] == "count");
  REQUIRE(one["programs"][0]["outcome"] == "verified");

  REQUIRE(one.contains("timing"));
  REQUIRE(one["timing"]["per_program"]["count"].contains("houdini_seconds"));
  REQUIRE(one["timing"].contains("throughput"));
  REQUIRE(one["timing"]["speedup"].contains("DYN||SBASE||H"));

  one.erase("timing");
  two.erase("timing");
  REQUIRE(one.dump() == two.dump());
}

TEST_CASE("corpus workers do not change the report") {
  std::vector<std::pair<std::string, Program>> corpus = {
      {"count", parse_ok(kCount)},
      {"mutual", parse_ok(kMutual)},
  };
  auto seq = report_json(analyze_corpus(corpus, {}, 1));
  auto par = report_json(analyze_corpus(corpus, {}, 2));
  seq.erase("timing");
  par.erase("timing");
  REQUIRE(seq.dump() == par.dump());
  REQUIRE(seq["corpus_size"] == 2);
}

TEST_CASE("an empty corpus still renders") {
  std::vector<ProgramMetrics> rs;
  auto j = report_json(rs);
  REQUIRE(j["corpus_size"] == 0);
  REQUIRE(j["hit_rate"]["r9"].is_null());
  REQUIRE(j["jaccard"].is_array());
  REQUIRE(j["jaccard"].empty());

  std::string text = report_text(rs);
  REQUIRE(text.find("corpus: 0 programs") != std::string::npos);
  REQUIRE_FALSE(influence_csv(rs).empty());
}

TEST_CASE("the text report renders rates and intervals") {
  ProgramMetrics pm = analyze_program("count", parse_ok(kCount));
  std::string text = report_text({pm});
  REQUIRE(text.find("50.0%") != std::string::npos);
  REQUIRE(text.find("n/a") != std::string::npos);
  REQUIRE(text.find("(-inf,-2)") != std::string::npos);
  REQUIRE(text.find("SBASE;H") != std::string::npos);
  REQUIRE(text.find("DYN||SBASE||H") != std::string::npos);
}
