#include <catch2/catch_amalgamated.hpp>

#include "mvl/ir.hpp"
#include "mvl/parser.hpp"

using namespace mvl;

static const char* kFig4Like = R"(
// two-counter loop
kernel counters width 6 {
  local i : bv;
  local j : bv;
  i := 0;
  j := 0;
  while (i < 10)
    invariant j == 2 * i;
    invariant j <= 20;
  {
    i := i + 1;
    j := j + 2;
  }
  assert j == 20;
}
)";

TEST_CASE("parsing a two-invariant loop program") {
  auto r = parse(kFig4Like);
  REQUIRE(r.ok());
  const Program& p = *r.program;
  REQUIRE(p.name == "counters");
  REQUIRE(p.bit_width == 6);
  REQUIRE(p.locals.size() == 2);
  REQUIRE(p.body.size() == 4);
  const Stmt& loop = p.body[2];
  REQUIRE(loop.kind == StmtKind::While);
  REQUIRE(loop.loop_id == "L0");
  REQUIRE(loop.invariants.size() == 2);
  REQUIRE(loop.invariants[0].origin == "user");
  REQUIRE(p.body[3].kind == StmtKind::Assert);
  REQUIRE(p.body[3].tag == "a0");
  REQUIRE(typecheck(p).empty());
}

TEST_CASE("assert tags and loop ids are assigned in document order") {
  auto r = parse(R"(kernel t width 4 {
    local i : bv;
    assert true;
    while (i < 2) { assert true; }
    while (i < 3) { if (i == 0) { assert true; } }
    assert true;
  })");
  REQUIRE(r.ok());
  const auto& b = r.program->body;
  REQUIRE(b[0].tag == "a0");
  REQUIRE(b[1].loop_id == "L0");
  REQUIRE(b[1].body[0].tag == "a1");
  REQUIRE(b[2].loop_id == "L1");
  REQUIRE(b[2].body[0].body[0].tag == "a2");
  REQUIRE(b[3].tag == "a3");
}

TEST_CASE("operator precedence follows C") {
  auto e = parse_expression("a + b * c");
  REQUIRE(e);
  REQUIRE(e->op == Op::Add);
  REQUIRE(e->b->op == Op::Mul);

  // relational binds tighter than equality
  auto f = parse_expression("x < 4 == y < 4");
  REQUIRE(f->op == Op::Eq);
  REQUIRE(f->a->op == Op::ULt);
  REQUIRE(f->b->op == Op::ULt);

  // shifts bind tighter than relational
  auto g = parse_expression("x << 1 < 8");
  REQUIRE(g->op == Op::ULt);
  REQUIRE(g->a->op == Op::Shl);

  // implication is right-associative and lowest
  auto h = parse_expression("a ==> b ==> c");
  REQUIRE(h->op == Op::Implies);
  REQUIRE(h->b->op == Op::Implies);

  auto k = parse_expression("x % 4 == y % 4 && z != 0");
  REQUIRE(k->op == Op::And);
  REQUIRE(k->a->op == Op::Eq);

  auto n = parse_expression("!p || q");
  REQUIRE(n->op == Op::Or);
  REQUIRE(n->a->kind == ExprKind::Unary);
}

TEST_CASE("ghost references and array reads parse inside expressions") {
  auto e = parse_expression("write_has_occurred(out) ==> write_offset(out) % 2 == tid");
  REQUIRE(e);
  REQUIRE(e->op == Op::Implies);
  REQUIRE(e->a->kind == ExprKind::Ghost);
  REQUIRE(e->a->ghost == GhostKind::WriteHasOccurred);
  REQUIRE(e->a->name == "out");

  auto f = parse_expression("out[i + 1] == 0");
  REQUIRE(f->a->kind == ExprKind::ArrayRead);
  REQUIRE(f->a->name == "out");
}

TEST_CASE("thread_param pragmas, disable clauses and candidates survive a round trip") {
  const char* src = R"(kernel k width 7 {
  disable r8, r9;
  param tidx : bv [thread_param dim=x kind=thread];
  param bidy : bv [thread_param dim=y kind=block];
  param n : bv;
  local i : bv;
  local f : bool;
  array odata;
  requires n == 8;
  requires tidx < 4;
  i := 0;
  while (i < 4)
    invariant i <= 4;
    candidate i == 0 || i == 2;
    candidate write_has_occurred(odata) ==> write_offset(odata) % 2 == tidx;
  {
    log_write odata[i * n + tidx];
    if (f) {
      havoc i, write_offset(odata);
    } else {
      i := i + 2;
    }
  }
  assert !write_has_occurred(odata) || write_offset(odata) <= 60;
})";
  auto r = parse(src);
  REQUIRE(r.ok());
  REQUIRE(typecheck(*r.program).empty());
  REQUIRE(r.program->params[0].thread_kind == ThreadParamKind::Thread);
  REQUIRE(r.program->params[0].thread_dim == 'x');
  REQUIRE(r.program->params[1].thread_kind == ThreadParamKind::Block);
  REQUIRE(r.program->disabled_rules == std::vector<std::string>{"r8", "r9"});

  std::string printed = pretty_print(*r.program);
  auto r2 = parse(printed);
  REQUIRE(r2.ok());
  REQUIRE(program_equal(*r.program, *r2.program));
  // printing is canonical: a second round trip is byte-identical
  REQUIRE(pretty_print(*r2.program) == printed);
}

TEST_CASE("round trip preserves structure for a batch of hand programs") {
  const char* sources[] = {
      "kernel a width 4 { local x : bv; x := 1 + 2 * 3; }",
      "kernel b width 4 { local x : bv; x := (1 + 2) * 3; }",
      "kernel c width 4 { local p : bool; p := true ==> false ==> true; }",
      "kernel d width 4 { local p : bool; p := (true ==> false) ==> true; }",
      "kernel e width 4 { local x : bv; x := 7 - 2 - 1; }",
      "kernel f width 4 { local x : bv; x := 7 - (2 - 1); }",
      "kernel g width 5 { local x : bv; local p : bool; p := !(x == 1) && !p; }",
      "kernel h width 5 { array z; havoc write_has_occurred(z), write_offset(z); }",
      "kernel i width 5 { local x : bv; x := x & 3 | x ^ 1; }",
  };
  for (const char* src : sources) {
    auto r = parse(src);
    INFO(src);
    REQUIRE(r.ok());
    auto r2 = parse(pretty_print(*r.program));
    REQUIRE(r2.ok());
    REQUIRE(program_equal(*r.program, *r2.program));
  }
}

TEST_CASE("parse errors carry positions") {
  auto r = parse("kernel bad width 4 {\n  local i : bv\n  i := 0;\n}");
  REQUIRE(!r.ok());
  REQUIRE(r.diagnostics.size() == 1);
  REQUIRE(r.diagnostics[0].span.line == 3);  // missing ';' discovered at 'i'

  auto r2 = parse("kernel bad width 4 { disable r99; }");
  REQUIRE(!r2.ok());
  REQUIRE(r2.diagnostics[0].message.find("unknown rule") != std::string::npos);

  auto r3 = parse("kernel bad width 4 { local i : bv; } trailing");
  REQUIRE(!r3.ok());

  auto r4 = parse("kernel bad width 4 { local i : int; }");
  REQUIRE(!r4.ok());

  auto r5 = parse("kernel bad width 4 { local i : bv [thread_param dim=x kind=thread]; }");
  REQUIRE(!r5.ok());  // pragma only valid on params
}
