#pragma once

// Core IR for the miniature verification language (MVL): a single procedure
// over fixed-width unsigned bit-vectors and booleans, with structured loops
// and per-array access instrumentation (the "tracked access" ghost state).

#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mvl {

// ---------------------------------------------------------------------------
// PRNG: splitmix64. One fixed, documented generator so every seeded run is
// reproducible across platforms. A generator can also be put in scripted mode,
// where draws pop a recorded value sequence instead — that is how
// counterexamples replay through the interpreter.

struct SplitMix64 {
  uint64_t state = 0;
  const std::vector<uint64_t>* script = nullptr;  // scripted mode when set
  size_t script_pos = 0;

  explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

  static SplitMix64 scripted(const std::vector<uint64_t>& values) {
    SplitMix64 g;
    g.script = &values;
    return g;
  }

  uint64_t next() {
    if (script) return script_pos < script->size() ? (*script)[script_pos++] : 0;
    state += 0x9E3779B97F4A7C15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform value in [0, n). n must be nonzero. Plain modulo: the tiny bias
  // is irrelevant here, determinism is what matters.
  uint64_t below(uint64_t n) { return next() % n; }

  // Deterministic child stream i of this seed.
  static SplitMix64 split(uint64_t seed, uint64_t i) {
    SplitMix64 g(seed ^ (0xA24BAED4963EE407ull * (i + 1)));
    g.next();
    return g;
  }
};

// ---------------------------------------------------------------------------
// Source locations (parser fills these in; programmatic construction leaves
// them empty). Structural equality of IR ignores spans.

struct SourceSpan {
  int line = 0;
  int col = 0;
  bool valid() const { return line > 0; }
};

struct Diagnostic {
  std::string message;
  SourceSpan span;
  std::string where;  // fallback path when no span, e.g. "loop L0 / stmt 2"

  std::string render() const {
    char buf[64];
    if (span.valid()) {
      std::snprintf(buf, sizeof buf, "%d:%d: ", span.line, span.col);
      return std::string(buf) + message;
    }
    if (!where.empty()) return where + ": " + message;
    return message;
  }
};

// ---------------------------------------------------------------------------
// Types and expressions.

enum class Type : uint8_t { Bv, Bool };

enum class GhostKind : uint8_t {
  WriteHasOccurred,
  WriteOffset,
  ReadHasOccurred,
  ReadOffset,
};

inline const char* ghost_kind_name(GhostKind k) {
  switch (k) {
    case GhostKind::WriteHasOccurred: return "write_has_occurred";
    case GhostKind::WriteOffset: return "write_offset";
    case GhostKind::ReadHasOccurred: return "read_has_occurred";
    case GhostKind::ReadOffset: return "read_offset";
  }
  return "?";
}

inline bool ghost_kind_is_bool(GhostKind k) {
  return k == GhostKind::WriteHasOccurred || k == GhostKind::ReadHasOccurred;
}

// Canonical scalar name for a ghost variable, e.g. "write_offset(out)".
// Ghosts live in the environment under these names.
inline std::string ghost_name(GhostKind k, const std::string& array) {
  return std::string(ghost_kind_name(k)) + "(" + array + ")";
}

enum class ExprKind : uint8_t {
  BvLit,
  BoolLit,
  Var,
  Ghost,
  ArrayRead,
  Unary,   // logical not
  Binary,
};

enum class Op : uint8_t {
  // bv -> bv
  Add, Sub, Mul, UDiv, URem, Shl, LShr, BitAnd, BitOr, BitXor,
  // bv x bv -> bool (Eq/Ne also bool x bool -> bool)
  Eq, Ne, ULt, ULe,
  // bool -> bool
  And, Or, Implies, Not,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind;
  Op op = Op::Add;          // Unary/Binary
  uint32_t literal = 0;     // BvLit value, BoolLit 0/1
  std::string name;         // Var name or array name (Ghost/ArrayRead)
  GhostKind ghost = GhostKind::WriteHasOccurred;
  ExprPtr a, b;             // operands; ArrayRead offset in a
};

inline ExprPtr bv(uint32_t v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::BvLit;
  e->literal = v;
  return e;
}

inline ExprPtr boolean(bool v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::BoolLit;
  e->literal = v ? 1 : 0;
  return e;
}

inline ExprPtr var(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Var;
  e->name = std::move(name);
  return e;
}

inline ExprPtr ghost(GhostKind k, std::string array) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Ghost;
  e->ghost = k;
  e->name = std::move(array);
  return e;
}

inline ExprPtr array_read(std::string array, ExprPtr offset) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::ArrayRead;
  e->name = std::move(array);
  e->a = std::move(offset);
  return e;
}

inline ExprPtr unary(Op op, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Unary;
  e->op = op;
  e->a = std::move(a);
  return e;
}

inline ExprPtr binary(Op op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Binary;
  e->op = op;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

inline ExprPtr add(ExprPtr a, ExprPtr b) { return binary(Op::Add, a, b); }
inline ExprPtr sub(ExprPtr a, ExprPtr b) { return binary(Op::Sub, a, b); }
inline ExprPtr mul(ExprPtr a, ExprPtr b) { return binary(Op::Mul, a, b); }
inline ExprPtr udiv(ExprPtr a, ExprPtr b) { return binary(Op::UDiv, a, b); }
inline ExprPtr urem(ExprPtr a, ExprPtr b) { return binary(Op::URem, a, b); }
inline ExprPtr eq(ExprPtr a, ExprPtr b) { return binary(Op::Eq, a, b); }
inline ExprPtr ne(ExprPtr a, ExprPtr b) { return binary(Op::Ne, a, b); }
inline ExprPtr ult(ExprPtr a, ExprPtr b) { return binary(Op::ULt, a, b); }
inline ExprPtr ule(ExprPtr a, ExprPtr b) { return binary(Op::ULe, a, b); }
inline ExprPtr land(ExprPtr a, ExprPtr b) { return binary(Op::And, a, b); }
inline ExprPtr lor(ExprPtr a, ExprPtr b) { return binary(Op::Or, a, b); }
inline ExprPtr implies(ExprPtr a, ExprPtr b) { return binary(Op::Implies, a, b); }
inline ExprPtr lnot(ExprPtr a) { return unary(Op::Not, a); }

inline bool expr_equal(const ExprPtr& x, const ExprPtr& y) {
  if (x == y) return true;
  if (!x || !y) return false;
  if (x->kind != y->kind) return false;
  switch (x->kind) {
    case ExprKind::BvLit:
    case ExprKind::BoolLit:
      return x->literal == y->literal;
    case ExprKind::Var:
      return x->name == y->name;
    case ExprKind::Ghost:
      return x->ghost == y->ghost && x->name == y->name;
    case ExprKind::ArrayRead:
      return x->name == y->name && expr_equal(x->a, y->a);
    case ExprKind::Unary:
      return x->op == y->op && expr_equal(x->a, y->a);
    case ExprKind::Binary:
      return x->op == y->op && expr_equal(x->a, y->a) && expr_equal(x->b, y->b);
  }
  return false;
}

namespace detail {

inline void and_parts(const ExprPtr& e, std::vector<const Expr*>& out) {
  if (e->kind == ExprKind::Binary && e->op == Op::And) {
    and_parts(e->a, out);
    and_parts(e->b, out);
  } else {
    out.push_back(e.get());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Declarations, statements, programs.

enum class ThreadParamKind : uint8_t { None, Thread, Block };

struct VarDecl {
  std::string name;
  Type type = Type::Bv;
  bool is_param = false;
  ThreadParamKind thread_kind = ThreadParamKind::None;
  char thread_dim = 0;  // 'x', 'y' or 'z' when thread_kind != None
  SourceSpan span;
};

struct ArrayDecl {
  std::string name;
  SourceSpan span;
};

struct Invariant {
  ExprPtr expr;
  std::string origin = "user";  // "user" or a candidate id rendered as text
};

enum class StmtKind : uint8_t {
  Assign,
  Havoc,
  Assert,
  Assume,
  If,
  While,
  LogWrite,
  LogRead,
};

struct Stmt {
  StmtKind kind;
  std::string target;                // Assign lhs; LogWrite/LogRead array
  ExprPtr expr;                      // Assign rhs; Assert/Assume; If/While guard; log offset
  std::vector<std::string> vars;     // Havoc targets (may include ghost names)
  std::string tag;                   // Assert tag, unique per program
  std::vector<Stmt> body;            // If then-branch; While body
  std::vector<Stmt> else_body;       // If else-branch
  bool has_else = false;
  std::vector<Invariant> invariants;     // While: user invariants
  std::vector<ExprPtr> candidate_pragmas;  // While: candidate annotations
  std::string loop_id;               // While, unique per program
  SourceSpan span;
};

inline Stmt assign(std::string v, ExprPtr e) {
  Stmt s; s.kind = StmtKind::Assign; s.target = std::move(v); s.expr = std::move(e);
  return s;
}
inline Stmt havoc(std::vector<std::string> vs) {
  Stmt s; s.kind = StmtKind::Havoc; s.vars = std::move(vs);
  return s;
}
inline Stmt assert_stmt(ExprPtr e, std::string tag) {
  Stmt s; s.kind = StmtKind::Assert; s.expr = std::move(e); s.tag = std::move(tag);
  return s;
}
inline Stmt assume_stmt(ExprPtr e) {
  Stmt s; s.kind = StmtKind::Assume; s.expr = std::move(e);
  return s;
}
inline Stmt if_stmt(ExprPtr guard, std::vector<Stmt> then_b, std::vector<Stmt> else_b = {},
                    bool has_else = false) {
  Stmt s; s.kind = StmtKind::If; s.expr = std::move(guard);
  s.body = std::move(then_b); s.else_body = std::move(else_b);
  s.has_else = has_else || !s.else_body.empty();
  return s;
}
inline Stmt while_stmt(ExprPtr guard, std::vector<Invariant> invs, std::vector<Stmt> body,
                       std::string loop_id) {
  Stmt s; s.kind = StmtKind::While; s.expr = std::move(guard);
  s.invariants = std::move(invs); s.body = std::move(body); s.loop_id = std::move(loop_id);
  return s;
}
inline Stmt log_write(std::string array, ExprPtr offset) {
  Stmt s; s.kind = StmtKind::LogWrite; s.target = std::move(array); s.expr = std::move(offset);
  return s;
}
inline Stmt log_read(std::string array, ExprPtr offset) {
  Stmt s; s.kind = StmtKind::LogRead; s.target = std::move(array); s.expr = std::move(offset);
  return s;
}

struct Program {
  std::string name;
  uint32_t bit_width = 4;  // 1..16
  std::vector<VarDecl> params;
  std::vector<VarDecl> locals;
  std::vector<ArrayDecl> arrays;
  std::vector<ExprPtr> preconditions;  // over params only
  std::vector<Stmt> body;
  std::vector<std::string> disabled_rules;  // per-program "disable" clause

  uint32_t mask() const { return (bit_width >= 32) ? 0xFFFFFFFFu : ((1u << bit_width) - 1); }
};

inline bool stmt_equal(const Stmt& x, const Stmt& y);

inline bool stmt_list_equal(const std::vector<Stmt>& x, const std::vector<Stmt>& y) {
  if (x.size() != y.size()) return false;
  for (size_t i = 0; i < x.size(); ++i)
    if (!stmt_equal(x[i], y[i])) return false;
  return true;
}

inline bool stmt_equal(const Stmt& x, const Stmt& y) {
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case StmtKind::Assign:
      return x.target == y.target && expr_equal(x.expr, y.expr);
    case StmtKind::Havoc:
      return x.vars == y.vars;
    case StmtKind::Assert:
      return x.tag == y.tag && expr_equal(x.expr, y.expr);
    case StmtKind::Assume:
      return expr_equal(x.expr, y.expr);
    case StmtKind::If:
      return expr_equal(x.expr, y.expr) && x.has_else == y.has_else &&
             stmt_list_equal(x.body, y.body) && stmt_list_equal(x.else_body, y.else_body);
    case StmtKind::While: {
      if (!expr_equal(x.expr, y.expr) || x.loop_id != y.loop_id) return false;
      if (x.invariants.size() != y.invariants.size()) return false;
      for (size_t i = 0; i < x.invariants.size(); ++i)
        if (x.invariants[i].origin != y.invariants[i].origin ||
            !expr_equal(x.invariants[i].expr, y.invariants[i].expr))
          return false;
      if (x.candidate_pragmas.size() != y.candidate_pragmas.size()) return false;
      for (size_t i = 0; i < x.candidate_pragmas.size(); ++i)
        if (!expr_equal(x.candidate_pragmas[i], y.candidate_pragmas[i])) return false;
      return stmt_list_equal(x.body, y.body);
    }
    case StmtKind::LogWrite:
    case StmtKind::LogRead:
      return x.target == y.target && expr_equal(x.expr, y.expr);
  }
  return false;
}

inline bool program_equal(const Program& x, const Program& y) {
  if (x.name != y.name || x.bit_width != y.bit_width) return false;
  auto decls_equal = [](const std::vector<VarDecl>& a, const std::vector<VarDecl>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
      if (a[i].name != b[i].name || a[i].type != b[i].type || a[i].is_param != b[i].is_param ||
          a[i].thread_kind != b[i].thread_kind || a[i].thread_dim != b[i].thread_dim)
        return false;
    return true;
  };
  if (!decls_equal(x.params, y.params) || !decls_equal(x.locals, y.locals)) return false;
  if (x.arrays.size() != y.arrays.size()) return false;
  for (size_t i = 0; i < x.arrays.size(); ++i)
    if (x.arrays[i].name != y.arrays[i].name) return false;
  if (x.preconditions.size() != y.preconditions.size()) return false;
  for (size_t i = 0; i < x.preconditions.size(); ++i)
    if (!expr_equal(x.preconditions[i], y.preconditions[i])) return false;
  if (x.disabled_rules != y.disabled_rules) return false;
  return stmt_list_equal(x.body, y.body);
}

// ---------------------------------------------------------------------------
// Rule identifiers. Numbering is stable; "pragma" marks candidates written
// directly in the source as `candidate e;` clauses.

enum class RuleId : uint8_t {
  pragma,
  r0,   // access breaking over thread-component offsets
  r1,   // accessed offsets satisfy stride predicate
  r2,   // access lower bound per block
  r3,   // access upper bound per block
  r8,   // guard variable non-negative
  r9,   // initial value bounds a guard variable
  r10,  // loop counter is strided
  r12,  // no read logged for an array at this loop
  r13,  // no write logged for an array at this loop
  r14,  // power of two (zero allowed)
  r15,  // power of two, nonzero
  r17,  // product of doubling/halving pair is invariant
};

inline const char* rule_name(RuleId r) {
  switch (r) {
    case RuleId::pragma: return "pragma";
    case RuleId::r0: return "r0";
    case RuleId::r1: return "r1";
    case RuleId::r2: return "r2";
    case RuleId::r3: return "r3";
    case RuleId::r8: return "r8";
    case RuleId::r9: return "r9";
    case RuleId::r10: return "r10";
    case RuleId::r12: return "r12";
    case RuleId::r13: return "r13";
    case RuleId::r14: return "r14";
    case RuleId::r15: return "r15";
    case RuleId::r17: return "r17";
  }
  return "?";
}

inline std::optional<RuleId> rule_from_name(const std::string& s) {
  static const std::pair<const char*, RuleId> table[] = {
      {"pragma", RuleId::pragma}, {"r0", RuleId::r0},   {"r1", RuleId::r1},
      {"r2", RuleId::r2},         {"r3", RuleId::r3},   {"r8", RuleId::r8},
      {"r9", RuleId::r9},         {"r10", RuleId::r10}, {"r12", RuleId::r12},
      {"r13", RuleId::r13},       {"r14", RuleId::r14}, {"r15", RuleId::r15},
      {"r17", RuleId::r17},
  };
  for (auto& [n, r] : table)
    if (s == n) return r;
  return std::nullopt;
}

inline const std::vector<RuleId>& all_rules() {
  static const std::vector<RuleId> rules = {
      RuleId::pragma, RuleId::r0, RuleId::r1,  RuleId::r2,  RuleId::r3,
      RuleId::r8,     RuleId::r9, RuleId::r10, RuleId::r12, RuleId::r13,
      RuleId::r14,    RuleId::r15, RuleId::r17,
  };
  return rules;
}

enum class CandidateStatus : uint8_t { Pending, Refuted, Proved };

struct Candidate {
  int id = 0;
  RuleId rule = RuleId::pragma;
  std::string loop_id;
  ExprPtr expr;
  CandidateStatus status = CandidateStatus::Pending;
  // set when status == Refuted
  int refuted_round = 0;
  std::string refuted_by;
};

// ---------------------------------------------------------------------------
// Scoping and typing.

struct ScopeInfo {
  std::map<std::string, Type> scalars;   // declared params + locals
  std::set<std::string> params;
  std::set<std::string> arrays;
};

inline ScopeInfo scope_of(const Program& p) {
  ScopeInfo sc;
  for (auto& d : p.params) {
    sc.scalars[d.name] = d.type;
    sc.params.insert(d.name);
  }
  for (auto& d : p.locals) sc.scalars[d.name] = d.type;
  for (auto& a : p.arrays) sc.arrays.insert(a.name);
  return sc;
}

// Type of an expression, or nullopt with a diagnostic appended.
inline std::optional<Type> type_of(const ExprPtr& e, const ScopeInfo& sc,
                                   std::vector<Diagnostic>* diags,
                                   const std::string& where) {
  auto fail = [&](const std::string& msg) -> std::optional<Type> {
    if (diags) diags->push_back({msg, {}, where});
    return std::nullopt;
  };
  if (!e) return fail("null expression");
  switch (e->kind) {
    case ExprKind::BvLit: return Type::Bv;
    case ExprKind::BoolLit: return Type::Bool;
    case ExprKind::Var: {
      auto it = sc.scalars.find(e->name);
      if (it == sc.scalars.end()) return fail("undeclared variable '" + e->name + "'");
      return it->second;
    }
    case ExprKind::Ghost: {
      if (!sc.arrays.count(e->name)) return fail("unknown array '" + e->name + "'");
      return ghost_kind_is_bool(e->ghost) ? Type::Bool : Type::Bv;
    }
    case ExprKind::ArrayRead: {
      if (!sc.arrays.count(e->name)) return fail("unknown array '" + e->name + "'");
      auto t = type_of(e->a, sc, diags, where);
      if (!t) return std::nullopt;
      if (*t != Type::Bv) return fail("array offset must be a bit-vector");
      return Type::Bv;
    }
    case ExprKind::Unary: {
      auto t = type_of(e->a, sc, diags, where);
      if (!t) return std::nullopt;
      if (*t != Type::Bool) return fail("'!' needs a boolean operand");
      return Type::Bool;
    }
    case ExprKind::Binary: {
      auto ta = type_of(e->a, sc, diags, where);
      auto tb = type_of(e->b, sc, diags, where);
      if (!ta || !tb) return std::nullopt;
      switch (e->op) {
        case Op::Add: case Op::Sub: case Op::Mul: case Op::UDiv: case Op::URem:
        case Op::Shl: case Op::LShr: case Op::BitAnd: case Op::BitOr: case Op::BitXor:
          if (*ta != Type::Bv || *tb != Type::Bv)
            return fail("arithmetic needs bit-vector operands");
          return Type::Bv;
        case Op::Eq: case Op::Ne:
          if (*ta != *tb) return fail("'=='/'!=' operands must have the same type");
          return Type::Bool;
        case Op::ULt: case Op::ULe:
          if (*ta != Type::Bv || *tb != Type::Bv)
            return fail("comparison needs bit-vector operands");
          return Type::Bool;
        case Op::And: case Op::Or: case Op::Implies:
          if (*ta != Type::Bool || *tb != Type::Bool)
            return fail("logical operator needs boolean operands");
          return Type::Bool;
        case Op::Not:
          return fail("malformed unary node");
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

// Free scalar variables of an expression; ghost references are reported under
// their canonical names, e.g. "write_offset(out)".
inline void free_vars_into(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  switch (e->kind) {
    case ExprKind::BvLit:
    case ExprKind::BoolLit:
      return;
    case ExprKind::Var:
      out.insert(e->name);
      return;
    case ExprKind::Ghost:
      out.insert(ghost_name(e->ghost, e->name));
      return;
    case ExprKind::ArrayRead:
      free_vars_into(e->a, out);
      return;
    case ExprKind::Unary:
      free_vars_into(e->a, out);
      return;
    case ExprKind::Binary:
      free_vars_into(e->a, out);
      free_vars_into(e->b, out);
      return;
  }
}

inline std::set<std::string> free_vars(const ExprPtr& e) {
  std::set<std::string> out;
  free_vars_into(e, out);
  return out;
}

namespace detail {

inline void typecheck_stmts(const std::vector<Stmt>& stmts, const ScopeInfo& sc,
                            const Program& p, std::vector<Diagnostic>& diags,
                            std::set<std::string>& tags, std::set<std::string>& loops,
                            const std::string& path) {
  int idx = 0;
  for (auto& st : stmts) {
    std::string where = path + "stmt " + std::to_string(idx++);
    auto expect_bool = [&](const ExprPtr& e, const char* what) {
      auto t = type_of(e, sc, &diags, where);
      if (t && *t != Type::Bool)
        diags.push_back({std::string(what) + " must be boolean", st.span, where});
    };
    switch (st.kind) {
      case StmtKind::Assign: {
        auto it = sc.scalars.find(st.target);
        if (it == sc.scalars.end()) {
          diags.push_back({"assignment to undeclared variable '" + st.target + "'", st.span, where});
          break;
        }
        auto t = type_of(st.expr, sc, &diags, where);
        if (t && *t != it->second)
          diags.push_back({"assignment type mismatch for '" + st.target + "'", st.span, where});
        break;
      }
      case StmtKind::Havoc: {
        for (auto& v : st.vars) {
          if (sc.scalars.count(v)) continue;
          // ghost names are also valid havoc targets (cut programs use them)
          bool is_ghost = false;
          for (auto& a : p.arrays) {
            for (GhostKind k : {GhostKind::WriteHasOccurred, GhostKind::WriteOffset,
                                GhostKind::ReadHasOccurred, GhostKind::ReadOffset}) {
              if (v == ghost_name(k, a.name)) { is_ghost = true; break; }
            }
            if (is_ghost) break;
          }
          if (!is_ghost)
            diags.push_back({"havoc of undeclared variable '" + v + "'", st.span, where});
        }
        break;
      }
      case StmtKind::Assert: {
        expect_bool(st.expr, "assert condition");
        if (st.tag.empty())
          diags.push_back({"assert without a tag", st.span, where});
        else if (!tags.insert(st.tag).second)
          diags.push_back({"duplicate assert tag '" + st.tag + "'", st.span, where});
        break;
      }
      case StmtKind::Assume:
        expect_bool(st.expr, "assume condition");
        break;
      case StmtKind::If:
        expect_bool(st.expr, "if guard");
        typecheck_stmts(st.body, sc, p, diags, tags, loops, where + " / then / ");
        typecheck_stmts(st.else_body, sc, p, diags, tags, loops, where + " / else / ");
        break;
      case StmtKind::While: {
        expect_bool(st.expr, "loop guard");
        if (st.loop_id.empty())
          diags.push_back({"loop without id", st.span, where});
        else if (!loops.insert(st.loop_id).second)
          diags.push_back({"duplicate loop id '" + st.loop_id + "'", st.span, where});
        for (auto& inv : st.invariants) expect_bool(inv.expr, "invariant");
        for (auto& c : st.candidate_pragmas) expect_bool(c, "candidate");
        typecheck_stmts(st.body, sc, p, diags, tags, loops, where + " / body / ");
        break;
      }
      case StmtKind::LogWrite:
      case StmtKind::LogRead: {
        if (!sc.arrays.count(st.target))
          diags.push_back({"log of unknown array '" + st.target + "'", st.span, where});
        auto t = type_of(st.expr, sc, &diags, where);
        if (t && *t != Type::Bv)
          diags.push_back({"log offset must be a bit-vector", st.span, where});
        break;
      }
    }
  }
}

}  // namespace detail

inline std::vector<Diagnostic> typecheck(const Program& p) {
  std::vector<Diagnostic> diags;
  if (p.bit_width < 1 || p.bit_width > 16)
    diags.push_back({"bit_width must be in 1..16", {}, "program"});
  ScopeInfo sc;
  std::set<std::string> names;
  auto declare = [&](const VarDecl& d, bool is_param) {
    if (!names.insert(d.name).second)
      diags.push_back({"duplicate declaration of '" + d.name + "'", d.span, "decls"});
    sc.scalars[d.name] = d.type;
    if (is_param) sc.params.insert(d.name);
  };
  for (auto& d : p.params) declare(d, true);
  for (auto& d : p.locals) declare(d, false);
  for (auto& a : p.arrays) {
    if (!names.insert(a.name).second)
      diags.push_back({"duplicate declaration of '" + a.name + "'", a.span, "decls"});
    sc.arrays.insert(a.name);
  }
  for (auto& pre : p.preconditions) {
    auto t = type_of(pre, sc, &diags, "requires");
    if (t && *t != Type::Bool)
      diags.push_back({"requires clause must be boolean", {}, "requires"});
    for (auto& v : free_vars(pre)) {
      if (!sc.params.count(v))
        diags.push_back({"requires clause may only mention params, got '" + v + "'", {}, "requires"});
    }
  }
  for (auto& r : p.disabled_rules) {
    if (!rule_from_name(r))
      diags.push_back({"unknown rule '" + r + "' in disable clause", {}, "disable"});
  }
  std::set<std::string> tags, loops;
  detail::typecheck_stmts(p.body, sc, p, diags, tags, loops, "");
  return diags;
}

// ---------------------------------------------------------------------------
// Concrete evaluation. The environment maps every declared scalar and every
// ghost scalar to a value (bools are 0/1). Ghost offsets start at 0 and mean
// nothing until the matching has_occurred flag is set.

struct ExecState {
  std::map<std::string, uint32_t> env;
  std::vector<int> trace;        // visited basic block ids, in order
  uint64_t loop_iterations = 0;  // summed across all loops
};

inline ExecState initial_state(const Program& p,
                               const std::map<std::string, uint32_t>& param_values) {
  ExecState s;
  for (auto& d : p.params) {
    auto it = param_values.find(d.name);
    uint32_t v = (it == param_values.end()) ? 0 : it->second;
    s.env[d.name] = (d.type == Type::Bv) ? (v & p.mask()) : (v ? 1 : 0);
  }
  for (auto& d : p.locals) s.env[d.name] = 0;
  for (auto& a : p.arrays) {
    s.env[ghost_name(GhostKind::WriteHasOccurred, a.name)] = 0;
    s.env[ghost_name(GhostKind::WriteOffset, a.name)] = 0;
    s.env[ghost_name(GhostKind::ReadHasOccurred, a.name)] = 0;
    s.env[ghost_name(GhostKind::ReadOffset, a.name)] = 0;
  }
  return s;
}

// Evaluates an expression over a concrete environment. Array reads draw a
// fresh nondeterministic value from the RNG. Width semantics: all bv results
// are reduced mod 2^W; udiv/urem by zero give the all-ones value; shifting by
// W or more gives 0.
inline uint32_t eval_expr(const ExprPtr& e, const std::map<std::string, uint32_t>& env,
                          uint32_t width, SplitMix64* rng = nullptr) {
  const uint32_t mask = (width >= 32) ? 0xFFFFFFFFu : ((1u << width) - 1);
  switch (e->kind) {
    case ExprKind::BvLit: return e->literal & mask;
    case ExprKind::BoolLit: return e->literal;
    case ExprKind::Var: {
      auto it = env.find(e->name);
      return it == env.end() ? 0 : it->second;
    }
    case ExprKind::Ghost: {
      auto it = env.find(ghost_name(e->ghost, e->name));
      return it == env.end() ? 0 : it->second;
    }
    case ExprKind::ArrayRead: {
      eval_expr(e->a, env, width, rng);  // offset is evaluated but unused
      return rng ? static_cast<uint32_t>(rng->below(uint64_t(mask) + 1)) : 0;
    }
    case ExprKind::Unary:
      return eval_expr(e->a, env, width, rng) ? 0 : 1;
    case ExprKind::Binary: {
      uint32_t a = eval_expr(e->a, env, width, rng);
      uint32_t b = eval_expr(e->b, env, width, rng);
      switch (e->op) {
        case Op::Add: return (a + b) & mask;
        case Op::Sub: return (a - b) & mask;
        case Op::Mul: return static_cast<uint32_t>((uint64_t(a) * b) & mask);
        case Op::UDiv: return b == 0 ? mask : (a / b) & mask;
        case Op::URem: return b == 0 ? mask : (a % b) & mask;
        case Op::Shl: return b >= width ? 0 : (a << b) & mask;
        case Op::LShr: return b >= width ? 0 : (a >> b) & mask;
        case Op::BitAnd: return a & b;
        case Op::BitOr: return a | b;
        case Op::BitXor: return a ^ b;
        case Op::Eq: return a == b;
        case Op::Ne: return a != b;
        case Op::ULt: return a < b;
        case Op::ULe: return a <= b;
        case Op::And: return a && b;
        case Op::Or: return a || b;
        case Op::Implies: return !a || b;
        case Op::Not: return !a;
      }
      return 0;
    }
  }
  return 0;
}

enum class StepStatus : uint8_t { Ok, AssertFailed, AssumeViolated };

struct StepResult {
  StepStatus status = StepStatus::Ok;
  std::string failed_tag;
};

// True for declared bool scalars and has_occurred ghosts; havoc draws from
// {0,1} for these and from the full bv domain otherwise.
inline bool is_bool_scalar(const Program& p, const std::string& v) {
  for (auto& d : p.params)
    if (d.name == v) return d.type == Type::Bool;
  for (auto& d : p.locals)
    if (d.name == v) return d.type == Type::Bool;
  return v.find("has_occurred(") != std::string::npos;
}

// Executes a single non-loop statement in place. Havoc draws fresh values;
// LogWrite/LogRead flip a nondeterministic coin to either record this access
// as the tracked one or leave the ghost state alone.
inline StepResult step_stmt(const Stmt& st, ExecState& s, const Program& p, SplitMix64& rng) {
  const uint32_t width = p.bit_width;
  const uint32_t mask = p.mask();
  switch (st.kind) {
    case StmtKind::Assign:
      s.env[st.target] = eval_expr(st.expr, s.env, width, &rng);
      return {};
    case StmtKind::Havoc:
      for (auto& v : st.vars) {
        s.env[v] = is_bool_scalar(p, v) ? static_cast<uint32_t>(rng.below(2))
                                        : static_cast<uint32_t>(rng.below(uint64_t(mask) + 1));
      }
      return {};
    case StmtKind::Assert:
      if (!eval_expr(st.expr, s.env, width, &rng)) return {StepStatus::AssertFailed, st.tag};
      return {};
    case StmtKind::Assume:
      if (!eval_expr(st.expr, s.env, width, &rng)) return {StepStatus::AssumeViolated, ""};
      return {};
    case StmtKind::LogWrite:
    case StmtKind::LogRead: {
      uint32_t off = eval_expr(st.expr, s.env, width, &rng);
      if (rng.below(2) == 1) {
        bool wr = st.kind == StmtKind::LogWrite;
        s.env[ghost_name(wr ? GhostKind::WriteHasOccurred : GhostKind::ReadHasOccurred,
                         st.target)] = 1;
        s.env[ghost_name(wr ? GhostKind::WriteOffset : GhostKind::ReadOffset, st.target)] = off;
      }
      return {};
    }
    case StmtKind::If:
    case StmtKind::While:
      // control statements are driven by run_program
      return {};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Whole-program concrete interpreter (tree-walking). This is the reference
// semantics; the checker's enumeration engine is validated against it.

struct RunHooks {
  // called at every arrival at a loop head, before the guard is evaluated
  void (*on_loop_head)(void* ctx, const Stmt& loop, const ExecState& s) = nullptr;
  // called for every executed log statement with the concrete offset
  void (*on_log)(void* ctx, const Stmt& log, uint32_t offset) = nullptr;
  void* ctx = nullptr;
};

enum class RunStatus : uint8_t { Ok, AssertFailed, AssumeViolated, BudgetExhausted };

struct RunOutcome {
  RunStatus status = RunStatus::Ok;
  std::string failed_tag;
  uint64_t interpreted_statements = 0;
  ExecState state;
};

namespace detail {

struct BlockIds {
  std::map<const std::vector<Stmt>*, int> ids;
  int count = 1;  // block 0 is the program entry

  void number(const std::vector<Stmt>& stmts) {
    for (auto& st : stmts) {
      if (st.kind == StmtKind::If) {
        ids[&st.body] = count++;
        number(st.body);
        if (!st.else_body.empty() || st.has_else) {
          ids[&st.else_body] = count++;
          number(st.else_body);
        }
      } else if (st.kind == StmtKind::While) {
        ids[&st.body] = count++;
        number(st.body);
      }
    }
  }
};

}  // namespace detail

/// Total number of basic blocks of a program: the entry block plus one block
// per if-arm and per loop body.
inline int count_blocks(const Program& p) {
  detail::BlockIds b;
  b.number(p.body);
  return b.count;
}

struct Interpreter {
  const Program& p;
  SplitMix64& rng;
  uint64_t loop_iteration_budget;
  RunHooks hooks;
  detail::BlockIds blocks;
  uint64_t steps = 0;

  Interpreter(const Program& p_, SplitMix64& rng_, uint64_t budget = ~0ull, RunHooks h = {})
      : p(p_), rng(rng_), loop_iteration_budget(budget), hooks(h) {
    blocks.number(p.body);
  }

  RunStatus run_list(const std::vector<Stmt>& stmts, ExecState& s, std::string& failed_tag) {
    for (auto& st : stmts) {
      ++steps;
      switch (st.kind) {
        case StmtKind::If: {
          bool c = eval_expr(st.expr, s.env, p.bit_width, &rng) != 0;
          const std::vector<Stmt>* arm = c ? &st.body : &st.else_body;
          auto it = blocks.ids.find(arm);
          if (it != blocks.ids.end()) s.trace.push_back(it->second);
          auto r = run_list(*arm, s, failed_tag);
          if (r != RunStatus::Ok) return r;
          break;
        }
        case StmtKind::While: {
          for (;;) {
            if (hooks.on_loop_head) hooks.on_loop_head(hooks.ctx, st, s);
            if (!eval_expr(st.expr, s.env, p.bit_width, &rng)) break;
            if (s.loop_iterations >= loop_iteration_budget) return RunStatus::BudgetExhausted;
            ++s.loop_iterations;
            s.trace.push_back(blocks.ids[&st.body]);
            auto r = run_list(st.body, s, failed_tag);
            if (r != RunStatus::Ok) return r;
          }
          break;
        }
        case StmtKind::LogWrite:
        case StmtKind::LogRead: {
          if (hooks.on_log) {
            uint32_t off = eval_expr(st.expr, s.env, p.bit_width, nullptr);
            hooks.on_log(hooks.ctx, st, off);
          }
          auto r = step_stmt(st, s, p, rng);
          if (r.status != StepStatus::Ok) {
            failed_tag = r.failed_tag;
            return r.status == StepStatus::AssertFailed ? RunStatus::AssertFailed
                                                        : RunStatus::AssumeViolated;
          }
          break;
        }
        default: {
          auto r = step_stmt(st, s, p, rng);
          if (r.status != StepStatus::Ok) {
            failed_tag = r.failed_tag;
            return r.status == StepStatus::AssertFailed ? RunStatus::AssertFailed
                                                        : RunStatus::AssumeViolated;
          }
          break;
        }
      }
    }
    return RunStatus::Ok;
  }
};

inline RunOutcome run_program(const Program& p, const std::map<std::string, uint32_t>& inputs,
                              SplitMix64& rng, uint64_t loop_iteration_budget = ~0ull,
                              RunHooks hooks = {}) {
  RunOutcome out;
  out.state = initial_state(p, inputs);
  out.state.trace.push_back(0);  // entry block
  Interpreter in(p, rng, loop_iteration_budget, hooks);
  std::string tag;
  auto st = in.run_list(p.body, out.state, tag);
  out.status = st;
  out.failed_tag = tag;
  out.interpreted_statements = in.steps;
  return out;
}

}  // namespace mvl
