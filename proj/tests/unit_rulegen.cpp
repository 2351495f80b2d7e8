#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "mvl/parser.hpp"
#include "mvl/rulegen.hpp"

using namespace mvl;

namespace {

Program parse_ok(const std::string& text) {
  auto r = parse(text);
  REQUIRE(r.program.has_value());
  auto diags = typecheck(*r.program);
  REQUIRE(diags.empty());
  return *r.program;
}

ExprPtr expr(const std::string& text) {
  ExprPtr e = parse_expression(text);
  REQUIRE(e != nullptr);
  return e;
}

std::vector<Candidate> of_rule(const std::vector<Candidate>& cs, RuleId r) {
  std::vector<Candidate> out;
  for (const auto& c : cs)
    if (c.rule == r) out.push_back(c);
  return out;
}

void require_exprs(const std::vector<Candidate>& cs, const std::vector<std::string>& want) {
  REQUIRE(cs.size() == want.size());
  for (size_t i = 0; i < cs.size(); ++i) {
    INFO("candidate " << i << ": " << pretty_print_expr(cs[i].expr) << " vs " << want[i]);
    REQUIRE(expr_equal(cs[i].expr, expr(want[i])));
  }
}

std::string render(const std::vector<Candidate>& cs) {
  std::ostringstream os;
  for (const auto& c : cs)
    os << c.id << " " << rule_name(c.rule) << " " << c.loop_id << " "
       << pretty_print_expr(c.expr) << "\n";
  return os.str();
}

// width-6 counting loop: i steps by 1, j by 2, both initialised to zero
const char* kCount = R"(
kernel count width 6 {
  local i : bv;
  local j : bv;
  i := 0;
  j := 0;
  while (i < 10) {
    j := j + 2;
    i := i + 1;
  }
  assert j == 20;
}
)";

// two-component access layout: contiguous chunks of 4 per block component
const char* kLayout = R"(
kernel layout width 7 {
  param gx : bv [thread_param dim=x kind=block];
  param lx : bv [thread_param dim=x kind=thread];
  local i : bv;
  array out;
  requires lx < 4;
  i := 0;
  while (i < 4) {
    log_write out[4 * gx + lx];
    log_write out[lx];
    i := i + 1;
  }
}
)";

const char* kPow2 = R"(
kernel pow2 width 7 {
  local p : bv;
  local q : bv;
  p := 1;
  q := 32;
  while (0 < q) {
    p := p * 2;
    q := q / 2;
  }
  assert p == 64;
}
)";

}  // namespace

TEST_CASE("counting loop triggers bound, init and stride rules") {
  Program p = parse_ok(kCount);
  auto cs = generate_candidates(p);

  require_exprs(of_rule(cs, RuleId::r8), {"0 <= i", "0 <= j"});
  require_exprs(of_rule(cs, RuleId::r9), {"0 <= i", "i <= 0", "0 <= j", "j <= 0"});
  require_exprs(of_rule(cs, RuleId::r10), {"i % 1 == 0 % 1", "j % 2 == 0 % 2"});

  auto report = rule_trigger_report(p);
  REQUIRE(report.size() == all_rules().size());
  REQUIRE(report.at(RuleId::r8) == 2);
  REQUIRE(report.at(RuleId::r9) == 4);
  REQUIRE(report.at(RuleId::r10) == 2);
  for (RuleId r : {RuleId::pragma, RuleId::r0, RuleId::r1, RuleId::r2, RuleId::r3, RuleId::r12,
                   RuleId::r13, RuleId::r14, RuleId::r15, RuleId::r17})
    REQUIRE(report.at(r) == 0);
}

TEST_CASE("candidates are rule-major with sequential ids") {
  Program p = parse_ok(kCount);
  auto cs = generate_candidates(p);
  REQUIRE(cs.size() == 8);
  for (size_t i = 0; i < cs.size(); ++i) REQUIRE(cs[i].id == static_cast<int>(i));

  auto rules = all_rules();
  auto rank = [&](RuleId r) {
    return std::find(rules.begin(), rules.end(), r) - rules.begin();
  };
  for (size_t i = 1; i < cs.size(); ++i) REQUIRE(rank(cs[i - 1].rule) <= rank(cs[i].rule));
  for (const auto& c : cs) REQUIRE(c.loop_id == "L0");
}

TEST_CASE("loop-free programs trigger nothing") {
  Program p = parse_ok(R"(
kernel straight width 4 {
  local x : bv;
  havoc x;
  x := x + 1;
  assert x == x;
}
)");
  REQUIRE(generate_candidates(p).empty());
  auto report = rule_trigger_report(p);
  REQUIRE(report.size() == all_rules().size());
  for (const auto& [r, n] : report) REQUIRE(n == 0);
}

TEST_CASE("thread component offsets produce equality candidates") {
  Program p = parse_ok(kLayout);
  auto cs = generate_candidates(p);

  require_exprs(of_rule(cs, RuleId::r0),
                {"write_has_occurred(out) ==> write_offset(out) / 4 == gx",
                 "write_has_occurred(out) ==> write_offset(out) % 4 == lx",
                 "write_has_occurred(out) ==> write_offset(out) == lx"});
  require_exprs(of_rule(cs, RuleId::r2),
                {"write_has_occurred(out) ==> 4 * gx <= write_offset(out)"});
  require_exprs(of_rule(cs, RuleId::r3),
                {"write_has_occurred(out) ==> write_offset(out) < 4 * (gx + 1)"});
  REQUIRE(of_rule(cs, RuleId::r1).empty());
}

TEST_CASE("nested thread components peel into per-component equalities") {
  // four components at scales 32/8/4/1 plus a loop counter sharing the
  // innermost slot; the counter makes the last slot ambiguous, so the
  // bound on ty adds one residue guess
  Program p = parse_ok(R"(
kernel tiled width 7 {
  param bx : bv [thread_param dim=x kind=block];
  param by : bv [thread_param dim=y kind=block];
  param tx : bv [thread_param dim=x kind=thread];
  param ty : bv [thread_param dim=y kind=thread];
  local i : bv;
  array out;
  requires bx < 2;
  requires by < 2;
  requires tx < 4;
  requires ty < 2;
  i := 0;
  while (i < 4) {
    log_write out[32 * bx + 8 * tx + 4 * by + ty + i];
    i := i + 2;
  }
}
)");
  auto cs = generate_candidates(p);
  require_exprs(of_rule(cs, RuleId::r0),
                {"write_has_occurred(out) ==> write_offset(out) / 32 == bx",
                 "write_has_occurred(out) ==> write_offset(out) % 32 / 8 == tx",
                 "write_has_occurred(out) ==> write_offset(out) % 32 % 8 / 4 == by",
                 "write_has_occurred(out) ==> write_offset(out) % 32 % 8 % 4 == ty",
                 "write_has_occurred(out) ==> write_offset(out) % 32 % 8 % 4 % 2 == ty"});
}

TEST_CASE("component peeling requires a bound on every inner component") {
  Program p = parse_ok(R"(
kernel tiled width 7 {
  param bx : bv [thread_param dim=x kind=block];
  param tx : bv [thread_param dim=x kind=thread];
  local i : bv;
  array out;
  requires bx < 2;
  i := 0;
  while (i < 4) {
    log_write out[8 * bx + tx + i];
    i := i + 1;
  }
}
)");
  REQUIRE(of_rule(generate_candidates(p), RuleId::r0).empty());
}

TEST_CASE("scaled component with counter leftover gets no residue guess") {
  Program p = parse_ok(R"(
kernel part width 7 {
  param tx : bv [thread_param dim=x kind=thread];
  local i : bv;
  array out;
  requires tx < 4;
  i := 0;
  while (i < 8) {
    log_write out[8 * tx + i];
    i := i + 1;
  }
}
)");
  require_exprs(of_rule(generate_candidates(p), RuleId::r0),
                {"write_has_occurred(out) ==> write_offset(out) / 8 == tx"});
}

TEST_CASE("plain locals in offsets do not trigger component rules") {
  Program p = parse_ok(R"(
kernel plain width 5 {
  local i : bv;
  array out;
  i := 0;
  while (i < 8) {
    log_write out[i];
    i := i + 1;
  }
}
)");
  auto report = rule_trigger_report(p);
  REQUIRE(report.at(RuleId::r0) == 0);
  REQUIRE(report.at(RuleId::r2) == 0);
  REQUIRE(report.at(RuleId::r3) == 0);
}

TEST_CASE("strided offsets produce residue candidates") {
  Program p = parse_ok(R"(
kernel strided width 6 {
  local i : bv;
  array a;
  array b;
  i := 0;
  while (i < 8) {
    log_write a[2 * i + 1];
    log_read b[i * 4 + 6];
    i := i + 1;
  }
}
)");
  auto cs = of_rule(generate_candidates(p), RuleId::r1);
  require_exprs(cs, {"write_has_occurred(a) ==> write_offset(a) % 2 == 1",
                     "read_has_occurred(b) ==> read_offset(b) % 4 == 2"});
}

TEST_CASE("unit strides and plain offsets do not produce residues") {
  Program p = parse_ok(R"(
kernel nostride width 6 {
  local i : bv;
  array a;
  i := 0;
  while (i < 8) {
    log_write a[i + 1];
    log_write a[1 * i];
    i := i + 1;
  }
}
)");
  REQUIRE(rule_trigger_report(p).at(RuleId::r1) == 0);
}

TEST_CASE("offsets see straight-line definitions from the same iteration") {
  Program p = parse_ok(R"(
kernel inlined width 6 {
  local i : bv;
  local t : bv;
  array a;
  i := 0;
  while (i < 8) {
    t := 2 * i;
    log_write a[t + 1];
    i := i + 1;
  }
}
)");
  auto cs = of_rule(generate_candidates(p), RuleId::r1);
  require_exprs(cs, {"write_has_occurred(a) ==> write_offset(a) % 2 == 1"});
}

TEST_CASE("arrays untouched by a loop body get quiet-ghost candidates") {
  Program p = parse_ok(R"(
kernel quiet width 4 {
  local i : bv;
  array a;
  array b;
  i := 0;
  while (i < 3) {
    log_read a[i];
    i := i + 1;
  }
  log_read b[0];
  log_write a[0];
}
)");
  auto cs = generate_candidates(p);
  require_exprs(of_rule(cs, RuleId::r12), {"read_has_occurred(b) == false"});
  require_exprs(of_rule(cs, RuleId::r13), {"write_has_occurred(a) == false"});
}

TEST_CASE("arrays never logged anywhere stay exempt from quiet-ghost candidates") {
  Program p = parse_ok(R"(
kernel untouched width 4 {
  local i : bv;
  array a;
  i := 0;
  while (i < 3) {
    i := i + 1;
  }
}
)");
  auto report = rule_trigger_report(p);
  REQUIRE(report.at(RuleId::r12) == 0);
  REQUIRE(report.at(RuleId::r13) == 0);
}

TEST_CASE("doubling and halving variables get power-of-two range candidates") {
  Program p = parse_ok(kPow2);
  auto cs = generate_candidates(p);

  auto r14 = of_rule(cs, RuleId::r14);
  auto r15 = of_rule(cs, RuleId::r15);
  require_exprs(r14, {"p == 0 || p == 1 || p == 2 || p == 4 || p == 8 || p == 16 || p == 32 || p == 64",
                      "q == 0 || q == 1 || q == 2 || q == 4 || q == 8 || q == 16 || q == 32 || q == 64"});
  require_exprs(r15, {"p == 1 || p == 2 || p == 4 || p == 8 || p == 16 || p == 32 || p == 64",
                      "q == 1 || q == 2 || q == 4 || q == 8 || q == 16 || q == 32 || q == 64"});
  require_exprs(of_rule(cs, RuleId::r17), {"p * q == 1 * 32"});

  // the zero-free range is semantically contained in the full range
  for (size_t k = 0; k < r14.size(); ++k) {
    for (uint32_t v = 0; v < 128; ++v) {
      std::map<std::string, uint32_t> env{{"p", v}, {"q", v}};
      if (eval_expr(r15[k].expr, env, 7)) REQUIRE(eval_expr(r14[k].expr, env, 7) == 1);
    }
  }
}

TEST_CASE("shift forms of doubling and halving are recognised") {
  Program p = parse_ok(R"(
kernel shifts width 4 {
  local u : bv;
  local v : bv;
  local w : bv;
  u := 1;
  v := 8;
  w := 3;
  while (0 < v) {
    u := u << 1;
    v := v >> 1;
    w := w * 3;
  }
}
)");
  auto report = rule_trigger_report(p);
  REQUIRE(report.at(RuleId::r14) == 2);  // u and v, not w
  REQUIRE(report.at(RuleId::r15) == 2);
  auto r17 = of_rule(generate_candidates(p), RuleId::r17);
  require_exprs(r17, {"u * v == 1 * 8"});
}

TEST_CASE("initialisation lookups abort on intervening clobbers") {
  SECTION("havocked before the loop") {
    Program p = parse_ok(R"(
kernel hv width 4 {
  local i : bv;
  havoc i;
  while (i < 4) {
    i := i + 1;
  }
}
)");
    auto report = rule_trigger_report(p);
    REQUIRE(report.at(RuleId::r9) == 0);
    REQUIRE(report.at(RuleId::r10) == 0);
    REQUIRE(report.at(RuleId::r8) == 1);  // 0 <= i needs no initialiser
  }
  SECTION("conditionally reassigned before the loop") {
    Program p = parse_ok(R"(
kernel cond width 4 {
  param c : bool;
  local i : bv;
  i := 0;
  if (c) {
    i := 1;
  }
  while (i < 4) {
    i := i + 1;
  }
}
)");
    REQUIRE(rule_trigger_report(p).at(RuleId::r9) == 0);
  }
  SECTION("assignments to other variables do not interfere") {
    Program p = parse_ok(R"(
kernel other width 4 {
  local i : bv;
  local j : bv;
  i := 2;
  j := 5;
  while (i < 4) {
    i := i + 1;
  }
}
)");
    auto cs = of_rule(generate_candidates(p), RuleId::r9);
    require_exprs(cs, {"2 <= i", "i <= 2"});
  }
  SECTION("subtracting counters get no residue candidate") {
    Program p = parse_ok(R"(
kernel down width 4 {
  local i : bv;
  i := 8;
  while (0 < i) {
    i := i - 2;
  }
}
)");
    REQUIRE(rule_trigger_report(p).at(RuleId::r10) == 0);
    REQUIRE(rule_trigger_report(p).at(RuleId::r9) == 2);  // init known, bounds still emitted
  }
}

TEST_CASE("generation is deterministic") {
  for (const char* src : {kCount, kLayout, kPow2}) {
    Program p = parse_ok(src);
    REQUIRE(render(generate_candidates(p)) == render(generate_candidates(p)));
  }
}

TEST_CASE("disabling a rule removes exactly its candidates") {
  Program p = parse_ok(kLayout);
  auto full = generate_candidates(p);

  RuleConfig cfg;
  cfg.enabled.erase(RuleId::r0);
  auto trimmed = generate_candidates(p, cfg);

  std::vector<Candidate> expected;
  for (const auto& c : full)
    if (c.rule != RuleId::r0) expected.push_back(c);
  REQUIRE(trimmed.size() == expected.size());
  for (size_t i = 0; i < trimmed.size(); ++i) {
    REQUIRE(trimmed[i].id == static_cast<int>(i));
    REQUIRE(trimmed[i].rule == expected[i].rule);
    REQUIRE(trimmed[i].loop_id == expected[i].loop_id);
    REQUIRE(expr_equal(trimmed[i].expr, expected[i].expr));
  }
}

TEST_CASE("a program's disable clause masks rules regardless of config") {
  Program p = parse_ok(R"(
kernel masked width 6 {
  disable r8, r9;
  local i : bv;
  i := 0;
  while (i < 10) {
    i := i + 1;
  }
}
)");
  auto report = rule_trigger_report(p);
  REQUIRE(report.at(RuleId::r8) == 0);
  REQUIRE(report.at(RuleId::r9) == 0);
  REQUIRE(report.at(RuleId::r10) == 1);
}

TEST_CASE("pragma candidates come from the loop header and can be disabled") {
  Program p = parse_ok(R"(
kernel pragmas width 6 {
  local i : bv;
  i := 0;
  while (i < 10) candidate i <= 10; candidate 0 <= i; candidate i <= 10; {
    i := i + 1;
  }
}
)");
  auto cs = generate_candidates(p);
  auto pragmas = of_rule(cs, RuleId::pragma);
  require_exprs(pragmas, {"i <= 10", "0 <= i"});  // duplicate collapsed
  REQUIRE(cs[0].rule == RuleId::pragma);          // catalog order puts pragmas first

  Program q = parse_ok(R"(
kernel pragmas2 width 6 {
  disable pragma;
  local i : bv;
  i := 0;
  while (i < 10) candidate i <= 10; {
    i := i + 1;
  }
}
)");
  REQUIRE(rule_trigger_report(q).at(RuleId::pragma) == 0);
}

TEST_CASE("per-rule per-loop caps bound the output") {
  Program p = parse_ok(kCount);
  RuleConfig cfg;
  cfg.per_rule_loop_cap = 2;
  auto cs = generate_candidates(p, cfg);
  require_exprs(of_rule(cs, RuleId::r9), {"0 <= i", "i <= 0"});
  require_exprs(of_rule(cs, RuleId::r8), {"0 <= i", "0 <= j"});

  cfg.per_rule_loop_cap = 0;
  REQUIRE(generate_candidates(p, cfg).empty());
}

TEST_CASE("equal expressions from different rules are kept") {
  Program p = parse_ok(kCount);
  auto cs = generate_candidates(p);
  int zero_le_i = 0;
  for (const auto& c : cs)
    if (expr_equal(c.expr, expr("0 <= i"))) ++zero_le_i;
  REQUIRE(zero_le_i == 2);  // once from the guard-bound rule, once from the init rule
}

TEST_CASE("nested loops keep document order within each rule") {
  Program p = parse_ok(R"(
kernel nested width 5 {
  local i : bv;
  local j : bv;
  i := 0;
  while (i < 4) {
    j := 0;
    while (j < 4) {
      j := j + 1;
    }
    i := i + 1;
  }
}
)");
  auto cs = of_rule(generate_candidates(p), RuleId::r8);
  REQUIRE(cs.size() == 3);  // outer sees i and its counter j; inner sees j
  REQUIRE(cs[0].loop_id == "L0");
  REQUIRE(expr_equal(cs[0].expr, expr("0 <= i")));
  REQUIRE(cs[1].loop_id == "L0");
  REQUIRE(expr_equal(cs[1].expr, expr("0 <= j")));
  REQUIRE(cs[2].loop_id == "L1");
  REQUIRE(expr_equal(cs[2].expr, expr("0 <= j")));

  // the inner loop's j is reinitialised inside the outer body, so its init is visible
  auto r9 = of_rule(generate_candidates(p), RuleId::r9);
  bool inner_init = false;
  for (const auto& c : r9)
    if (c.loop_id == "L1" && expr_equal(c.expr, expr("j <= 0"))) inner_init = true;
  REQUIRE(inner_init);
}

TEST_CASE("trigger report always matches generated candidates") {
  for (const char* src : {kCount, kLayout, kPow2}) {
    Program p = parse_ok(src);
    auto cs = generate_candidates(p);
    auto report = rule_trigger_report(p);
    REQUIRE(report.size() == all_rules().size());
    for (RuleId r : all_rules())
      REQUIRE(report.at(r) == static_cast<int>(of_rule(cs, r).size()));
  }
}

TEST_CASE("every generated candidate typechecks once installed at its loop") {
  for (const char* src : {kCount, kLayout, kPow2}) {
    Program p = parse_ok(src);
    auto cs = generate_candidates(p);
    std::set<int> active;
    for (const auto& c : cs) active.insert(c.id);
    auto cut = cut_loops(p, cs, active);
    REQUIRE(cut.ok());
    auto diags = typecheck(cut.program);
    for (const auto& d : diags) INFO(d.message);
    REQUIRE(diags.empty());
  }
}
