#pragma once

// Complete validity checking of loop-free programs: exhaustive enumeration
// over every param assignment, havoc value, log choice, and array-read value.
// Programs are compiled to a small register machine first; the enumeration is
// a DFS over choice points with three-valued lookahead into the assumes that
// follow a choice, which prunes infeasible values before they fan out.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mvl/transforms.hpp"

namespace mvl {

enum class ChoiceKind : uint8_t { HavocValue, LogChoice, ArrayReadValue };

struct ChoiceRec {
  ChoiceKind kind = ChoiceKind::HavocValue;
  std::string name;  // havocked variable, or the logged/read array
  uint32_t value = 0;
};

// A falsifying execution: parameter assignment plus every nondeterministic
// value drawn along the path, in the order the interpreter would draw them.
struct Counterexample {
  std::map<std::string, uint32_t> params;
  std::vector<ChoiceRec> choices;
  std::string tag;

  std::vector<uint64_t> to_script() const {
    std::vector<uint64_t> s;
    s.reserve(choices.size());
    for (const auto& c : choices) s.push_back(c.value);
    return s;
  }
};

enum class VerdictKind : uint8_t { Valid, Failing, ResourceExceeded, Timeout };

struct Verdict {
  VerdictKind kind = VerdictKind::Valid;
  std::map<std::string, Counterexample> failing;  // tag -> least witness
  uint64_t state_space = 0;
  bool vacuous = false;  // Valid because no input satisfied the preconditions

  std::set<std::string> failing_tags() const {
    std::set<std::string> t;
    for (const auto& [k, v] : failing) t.insert(k);
    return t;
  }
};

struct CheckerConfig {
  uint64_t max_states = 1ull << 22;
  double timeout_seconds = 600.0;  // <= 0 disables the deadline
  std::string backend = "enumerate";  // "enumerate" or "smt:<command>"
  int workers = 1;
  // cooperative abort: when set and flipped true, the check stops at the next
  // poll point and reports Timeout
  const std::atomic<bool>* cancel = nullptr;
};

namespace detail {

enum class COpKind : uint8_t { Choice, Assign, Assert, Assume, BranchIfFalse, Jump, Log, Halt };
enum class ChoiceSrc : uint8_t { Param, Havoc, Coin, Read };

struct ENode {
  ExprKind kind = ExprKind::BvLit;
  Op op = Op::Not;
  int a = -1, b = -1;
  uint32_t literal = 0;
  int var = -1;
};

struct COp {
  COpKind kind = COpKind::Halt;
  int var = -1;   // Choice/Assign target
  int expr = -1;  // root node in the arena
  uint32_t lo = 0, hi = 0;
  ChoiceSrc src = ChoiceSrc::Havoc;
  int tag = -1;
  int target = -1;
  int ghost_hoc = -1, ghost_off = -1, coin = -1;
  std::string display;
  // assumes in the same choice/assume run after this op, and the choice vars
  // that are still unset when they are previewed
  std::vector<int> look_exprs;
  std::vector<int> look_unknowns;
};

struct CompiledProgram {
  std::vector<ENode> arena;
  std::vector<COp> ops;
  std::vector<std::string> var_names;
  std::vector<std::string> tags;
  uint32_t width = 4, mask = 15;
  int body_start = 0;       // first op after the precondition prefix
  uint64_t space = 1;       // saturated product of choice domain sizes
};

inline void split_conjuncts(const ExprPtr& e, std::vector<const Expr*>& out) {
  if (e->kind == ExprKind::Binary && e->op == Op::And) {
    split_conjuncts(e->a, out);
    split_conjuncts(e->b, out);
  } else {
    out.push_back(e.get());
  }
}

// Syntactic domain narrowing for a bv param from `requires` conjuncts of the
// shapes p==K, p<K, p<=K, K<=p, K<p. Everything else stays as rejection.
inline void narrow_domain(const std::string& name, const Expr* c, uint32_t mask,
                          uint32_t& lo, uint32_t& hi) {
  if (c->kind != ExprKind::Binary) return;
  const Expr* l = c->a.get();
  const Expr* r = c->b.get();
  auto is_var = [&](const Expr* e) { return e->kind == ExprKind::Var && e->name == name; };
  auto is_lit = [](const Expr* e) { return e->kind == ExprKind::BvLit; };
  if (c->op == Op::Eq) {
    const Expr* v = is_var(l) && is_lit(r) ? r : (is_var(r) && is_lit(l) ? l : nullptr);
    if (!v) return;
    uint32_t k = v->literal & mask;
    lo = std::max(lo, k);
    hi = std::min(hi, k);
  } else if (c->op == Op::ULt || c->op == Op::ULe) {
    if (is_var(l) && is_lit(r)) {
      uint32_t k = r->literal & mask;
      if (c->op == Op::ULe) hi = std::min(hi, k);
      else if (k == 0) { lo = 1; hi = 0; }  // p < 0: empty
      else hi = std::min(hi, k - 1);
    } else if (is_lit(l) && is_var(r)) {
      uint32_t k = l->literal & mask;
      if (c->op == Op::ULe) lo = std::max(lo, k);
      else if (k == mask) { lo = 1; hi = 0; }  // mask < p: empty
      else lo = std::max(lo, k + 1);
    }
  }
}

struct Compiler {
  const Program& p;
  CompiledProgram out;
  std::map<std::string, int> var_ids;
  std::map<std::string, int> tag_ids;
  int temp_counter = 0;

  explicit Compiler(const Program& prog) : p(prog) {
    out.width = p.bit_width;
    out.mask = p.mask();
  }

  int var_id(const std::string& name) {
    auto it = var_ids.find(name);
    if (it != var_ids.end()) return it->second;
    int id = static_cast<int>(out.var_names.size());
    var_ids.emplace(name, id);
    out.var_names.push_back(name);
    return id;
  }

  int tag_id(const std::string& tag) {
    auto it = tag_ids.find(tag);
    if (it != tag_ids.end()) return it->second;
    int id = static_cast<int>(out.tags.size());
    tag_ids.emplace(tag, id);
    out.tags.push_back(tag);
    return id;
  }

  int add_node(ENode n) {
    out.arena.push_back(n);
    return static_cast<int>(out.arena.size()) - 1;
  }

  // Compiles an expression; array reads hoist into fresh choice temps pushed
  // onto `pre` in exactly the order the interpreter draws them.
  int compile_expr(const ExprPtr& e, std::vector<COp>& pre) {
    ENode n;
    switch (e->kind) {
      case ExprKind::BvLit:
        n.kind = ExprKind::BvLit;
        n.literal = e->literal & out.mask;
        return add_node(n);
      case ExprKind::BoolLit:
        n.kind = ExprKind::BoolLit;
        n.literal = e->literal ? 1 : 0;
        return add_node(n);
      case ExprKind::Var:
        n.kind = ExprKind::Var;
        n.var = var_id(e->name);
        return add_node(n);
      case ExprKind::Ghost:
        n.kind = ExprKind::Var;
        n.var = var_id(ghost_name(e->ghost, e->name));
        return add_node(n);
      case ExprKind::ArrayRead: {
        compile_expr(e->a, pre);  // offset value unused; nested reads hoist
        int t = var_id("read:" + e->name + "#" + std::to_string(temp_counter++));
        COp c;
        c.kind = COpKind::Choice;
        c.var = t;
        c.lo = 0;
        c.hi = out.mask;
        c.src = ChoiceSrc::Read;
        c.display = e->name;
        pre.push_back(std::move(c));
        n.kind = ExprKind::Var;
        n.var = t;
        return add_node(n);
      }
      case ExprKind::Unary: {
        int a = compile_expr(e->a, pre);
        n.kind = ExprKind::Unary;
        n.op = e->op;
        n.a = a;
        return add_node(n);
      }
      case ExprKind::Binary: {
        int a = compile_expr(e->a, pre);
        int b = compile_expr(e->b, pre);
        n.kind = ExprKind::Binary;
        n.op = e->op;
        n.a = a;
        n.b = b;
        return add_node(n);
      }
    }
    return add_node(n);
  }

  void emit(std::vector<COp>& pre) {
    for (auto& c : pre) out.ops.push_back(std::move(c));
    pre.clear();
  }

  void compile_stmt(const Stmt& st) {
    std::vector<COp> pre;
    switch (st.kind) {
      case StmtKind::Assign: {
        int r = compile_expr(st.expr, pre);
        emit(pre);
        COp o;
        o.kind = COpKind::Assign;
        o.var = var_id(st.target);
        o.expr = r;
        out.ops.push_back(std::move(o));
        break;
      }
      case StmtKind::Havoc: {
        for (const auto& v : st.vars) {
          COp c;
          c.kind = COpKind::Choice;
          c.var = var_id(v);
          c.lo = 0;
          c.hi = is_bool_scalar(p, v) ? 1 : out.mask;
          c.src = ChoiceSrc::Havoc;
          c.display = v;
          out.ops.push_back(std::move(c));
        }
        break;
      }
      case StmtKind::Assert: {
        int r = compile_expr(st.expr, pre);
        emit(pre);
        COp o;
        o.kind = COpKind::Assert;
        o.expr = r;
        o.tag = tag_id(st.tag);
        out.ops.push_back(std::move(o));
        break;
      }
      case StmtKind::Assume: {
        int r = compile_expr(st.expr, pre);
        emit(pre);
        COp o;
        o.kind = COpKind::Assume;
        o.expr = r;
        out.ops.push_back(std::move(o));
        break;
      }
      case StmtKind::If: {
        int r = compile_expr(st.expr, pre);
        emit(pre);
        int brz = static_cast<int>(out.ops.size());
        COp o;
        o.kind = COpKind::BranchIfFalse;
        o.expr = r;
        out.ops.push_back(std::move(o));
        for (const auto& s : st.body) compile_stmt(s);
        int jmp = static_cast<int>(out.ops.size());
        COp j;
        j.kind = COpKind::Jump;
        out.ops.push_back(std::move(j));
        out.ops[brz].target = static_cast<int>(out.ops.size());
        for (const auto& s : st.else_body) compile_stmt(s);
        out.ops[jmp].target = static_cast<int>(out.ops.size());
        break;
      }
      case StmtKind::LogWrite:
      case StmtKind::LogRead: {
        bool wr = st.kind == StmtKind::LogWrite;
        int r = compile_expr(st.expr, pre);
        emit(pre);
        int coin = var_id("coin#" + std::to_string(temp_counter++));
        COp c;
        c.kind = COpKind::Choice;
        c.var = coin;
        c.lo = 0;
        c.hi = 1;
        c.src = ChoiceSrc::Coin;
        c.display = st.target;
        out.ops.push_back(std::move(c));
        COp o;
        o.kind = COpKind::Log;
        o.expr = r;
        o.ghost_hoc = var_id(
            ghost_name(wr ? GhostKind::WriteHasOccurred : GhostKind::ReadHasOccurred, st.target));
        o.ghost_off =
            var_id(ghost_name(wr ? GhostKind::WriteOffset : GhostKind::ReadOffset, st.target));
        o.coin = coin;
        out.ops.push_back(std::move(o));
        break;
      }
      case StmtKind::While:
        throw std::logic_error("checker: program contains a loop (cut or unroll it first)");
    }
  }

  void run() {
    // stable variable numbering: params, locals, ghosts, then temps
    for (const auto& d : p.params) var_id(d.name);
    for (const auto& d : p.locals) var_id(d.name);
    for (const auto& a : p.arrays) {
      var_id(ghost_name(GhostKind::WriteHasOccurred, a.name));
      var_id(ghost_name(GhostKind::WriteOffset, a.name));
      var_id(ghost_name(GhostKind::ReadHasOccurred, a.name));
      var_id(ghost_name(GhostKind::ReadOffset, a.name));
    }

    std::vector<const Expr*> conj;
    for (const auto& pre : p.preconditions) split_conjuncts(pre, conj);

    for (const auto& d : p.params) {
      COp c;
      c.kind = COpKind::Choice;
      c.var = var_id(d.name);
      c.src = ChoiceSrc::Param;
      c.display = d.name;
      c.lo = 0;
      c.hi = d.type == Type::Bool ? 1 : out.mask;
      if (d.type == Type::Bv)
        for (const Expr* e : conj) narrow_domain(d.name, e, out.mask, c.lo, c.hi);
      out.ops.push_back(std::move(c));
    }
    for (const auto& pre : p.preconditions) {
      std::vector<COp> hoisted;
      int r = compile_expr(pre, hoisted);
      emit(hoisted);
      COp o;
      o.kind = COpKind::Assume;
      o.expr = r;
      out.ops.push_back(std::move(o));
    }
    out.body_start = static_cast<int>(out.ops.size());

    for (const auto& st : p.body) compile_stmt(st);
    COp h;
    h.kind = COpKind::Halt;
    out.ops.push_back(std::move(h));

    // lookahead lists: per choice, the assumes later in its choice/assume run
    size_t i = 0;
    while (i < out.ops.size()) {
      auto in_run = [&](size_t k) {
        return out.ops[k].kind == COpKind::Choice || out.ops[k].kind == COpKind::Assume;
      };
      if (!in_run(i)) {
        ++i;
        continue;
      }
      size_t j = i;
      while (j < out.ops.size() && in_run(j)) ++j;
      for (size_t k = i; k < j; ++k) {
        if (out.ops[k].kind != COpKind::Choice) continue;
        for (size_t m = k + 1; m < j; ++m) {
          if (out.ops[m].kind == COpKind::Assume)
            out.ops[k].look_exprs.push_back(out.ops[m].expr);
          else
            out.ops[k].look_unknowns.push_back(out.ops[m].var);
        }
      }
      i = j;
    }

    out.space = 1;
    for (const auto& op : out.ops) {
      if (op.kind != COpKind::Choice) continue;
      uint64_t d = op.lo > op.hi ? 0 : uint64_t(op.hi) - op.lo + 1;
      if (d == 0) {
        out.space = 0;
        break;
      }
      if (out.space > UINT64_MAX / d)
        out.space = UINT64_MAX;
      else
        out.space *= d;
    }
  }
};

inline CompiledProgram compile_program(const Program& p) {
  Compiler c(p);
  c.run();
  return std::move(c.out);
}

inline uint32_t eval_binop(Op op, uint32_t a, uint32_t b, uint32_t width, uint32_t mask) {
  switch (op) {
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

struct Lookahead {
  uint32_t v = 0;
  bool known = false;
};

struct Enumerator {
  const CompiledProgram& cp;
  std::vector<uint32_t> env;
  std::vector<std::pair<const COp*, uint32_t>> trail;
  std::map<int, Counterexample> wit;
  size_t total_tags = 0;
  bool stop_at_body = false;  // no asserts: only probing precondition vacuity
  bool complete = false;
  bool reached_body = false;
  bool timed_out = false;
  bool use_deadline = false;
  std::chrono::steady_clock::time_point deadline;
  const std::atomic<bool>* cancel = nullptr;
  uint64_t nodes = 0;
  // worker partition: restrict one choice op to a subrange
  int part_op = -1;
  uint32_t part_lo = 0, part_hi = 0;

  explicit Enumerator(const CompiledProgram& c)
      : cp(c), env(c.var_names.size(), 0), total_tags(c.tags.size()) {}

  uint32_t eval(int idx) const {
    const ENode& n = cp.arena[idx];
    switch (n.kind) {
      case ExprKind::BvLit:
      case ExprKind::BoolLit: return n.literal;
      case ExprKind::Var: return env[n.var];
      case ExprKind::Unary: return !eval(n.a);
      default: break;
    }
    return eval_binop(n.op, eval(n.a), eval(n.b), cp.width, cp.mask);
  }

  Lookahead eval3(int idx, const std::vector<int>& unk) const {
    const ENode& n = cp.arena[idx];
    switch (n.kind) {
      case ExprKind::BvLit:
      case ExprKind::BoolLit: return {n.literal, true};
      case ExprKind::Var:
        for (int u : unk)
          if (u == n.var) return {0, false};
        return {env[n.var], true};
      case ExprKind::Unary: {
        auto a = eval3(n.a, unk);
        return a.known ? Lookahead{static_cast<uint32_t>(!a.v), true} : a;
      }
      default: break;
    }
    auto a = eval3(n.a, unk);
    auto b = eval3(n.b, unk);
    switch (n.op) {
      case Op::And:
        if ((a.known && !a.v) || (b.known && !b.v)) return {0, true};
        if (a.known && b.known) return {1, true};
        return {0, false};
      case Op::Or:
        if ((a.known && a.v) || (b.known && b.v)) return {1, true};
        if (a.known && b.known) return {0, true};
        return {0, false};
      case Op::Implies:
        if (a.known && !a.v) return {1, true};
        if (b.known && b.v) return {1, true};
        if (a.known && b.known) return {static_cast<uint32_t>(!a.v || b.v), true};
        return {0, false};
      default:
        if (!a.known || !b.known) return {0, false};
        return {eval_binop(n.op, a.v, b.v, cp.width, cp.mask), true};
    }
  }

  void record(int tag_idx) {
    if (wit.count(tag_idx)) return;
    Counterexample cex;
    cex.tag = cp.tags[tag_idx];
    for (const auto& [op, v] : trail) {
      if (op->src == ChoiceSrc::Param) {
        cex.params[cp.var_names[op->var]] = v;
      } else {
        ChoiceKind k = op->src == ChoiceSrc::Coin ? ChoiceKind::LogChoice
                       : op->src == ChoiceSrc::Read ? ChoiceKind::ArrayReadValue
                                                    : ChoiceKind::HavocValue;
        cex.choices.push_back({k, op->display, v});
      }
    }
    wit.emplace(tag_idx, std::move(cex));
    if (wit.size() == total_tags) complete = true;
  }

  void run(int pc) {
    if (complete || timed_out) return;
    for (;;) {
      if (pc == cp.body_start) {
        reached_body = true;
        if (stop_at_body) {
          complete = true;
          return;
        }
      }
      const COp& op = cp.ops[pc];
      switch (op.kind) {
        case COpKind::Halt: return;
        case COpKind::Assign:
          env[op.var] = eval(op.expr);
          ++pc;
          break;
        case COpKind::Assume:
          if (!eval(op.expr)) return;
          ++pc;
          break;
        case COpKind::Assert:
          if (!eval(op.expr)) record(op.tag);
          ++pc;
          break;
        case COpKind::BranchIfFalse:
          pc = eval(op.expr) ? pc + 1 : op.target;
          break;
        case COpKind::Jump:
          pc = op.target;
          break;
        case COpKind::Log:
          if (env[op.coin]) {
            env[op.ghost_hoc] = 1;
            env[op.ghost_off] = eval(op.expr);
          }
          ++pc;
          break;
        case COpKind::Choice: {
          uint32_t lo = op.lo, hi = op.hi;
          if (pc == part_op) {
            lo = part_lo;
            hi = part_hi;
          }
          if (lo > hi) return;
          std::vector<uint32_t> saved = env;
          for (uint32_t v = lo;; ++v) {
            if ((++nodes & 0xFFFu) == 0 &&
                ((use_deadline && std::chrono::steady_clock::now() > deadline) ||
                 (cancel && cancel->load(std::memory_order_relaxed))))
              timed_out = true;
            if (complete || timed_out) break;
            if (v != lo) env = saved;
            env[op.var] = v;
            bool pruned = false;
            for (int le : op.look_exprs) {
              Lookahead r = eval3(le, op.look_unknowns);
              if (r.known && !r.v) {
                pruned = true;
                break;
              }
            }
            if (!pruned) {
              trail.emplace_back(&op, v);
              run(pc + 1);
              trail.pop_back();
            }
            if (v == hi) break;
          }
          return;
        }
      }
    }
  }
};

}  // namespace detail

// Exact product of the domain sizes the checker would enumerate (params with
// syntactically narrowed domains, havocs, log coins, array reads). Saturates
// at UINT64_MAX.
inline uint64_t state_space_size(const Program& p) {
  return detail::compile_program(p).space;
}

// Exhaustive sweep: reports every assert tag that fails on at least one
// feasible execution, with the lexicographically least witness each (params
// first, then choices in path order). Asserts do not gate the sweep — path
// feasibility comes from assumes alone, and every assert on a feasible path
// is judged independently.
inline Verdict failing_asserts(const Program& p, const CheckerConfig& cfg = {}) {
  auto cp = detail::compile_program(p);
  Verdict out;
  out.state_space = cp.space;
  if (cp.space > cfg.max_states) {
    out.kind = VerdictKind::ResourceExceeded;
    return out;
  }

  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(std::max(0.0, cfg.timeout_seconds)));
  bool use_deadline = cfg.timeout_seconds > 0;

  // a worker split is only applied on a choice every path passes through:
  // the first op of the linear prefix that is a choice
  int first_choice = -1;
  for (size_t i = 0; i < cp.ops.size(); ++i) {
    auto k = cp.ops[i].kind;
    if (k == detail::COpKind::Choice) {
      first_choice = static_cast<int>(i);
      break;
    }
    if (k == detail::COpKind::BranchIfFalse || k == detail::COpKind::Jump ||
        k == detail::COpKind::Halt)
      break;
  }

  int workers = std::max(1, cfg.workers);
  uint64_t dom = 0;
  if (first_choice >= 0) {
    const auto& fc = cp.ops[first_choice];
    dom = fc.lo > fc.hi ? 0 : uint64_t(fc.hi) - fc.lo + 1;
  }
  if (first_choice < 0 || dom < 2) workers = 1;
  workers = static_cast<int>(std::min<uint64_t>(workers, dom == 0 ? 1 : dom));

  std::vector<detail::Enumerator> runs;
  runs.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    runs.emplace_back(cp);
    runs.back().stop_at_body = cp.tags.empty();
    runs.back().use_deadline = use_deadline;
    runs.back().deadline = deadline;
    runs.back().cancel = cfg.cancel;
    if (workers > 1) {
      const auto& fc = cp.ops[first_choice];
      uint64_t chunk = dom / workers, rem = dom % workers;
      uint64_t begin = fc.lo + uint64_t(w) * chunk + std::min<uint64_t>(w, rem);
      uint64_t end = begin + chunk + (uint64_t(w) < rem ? 1 : 0) - 1;
      runs.back().part_op = first_choice;
      runs.back().part_lo = static_cast<uint32_t>(begin);
      runs.back().part_hi = static_cast<uint32_t>(end);
    }
  }

  if (workers == 1) {
    runs[0].run(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (auto& r : runs) threads.emplace_back([&r] { r.run(0); });
    for (auto& t : threads) t.join();
  }

  // merge in partition order so the first witness per tag is the least one
  std::map<int, Counterexample> wit;
  bool reached_body = false, timed_out = false;
  for (auto& r : runs) {
    for (auto& [t, cex] : r.wit) wit.emplace(t, std::move(cex));
    reached_body = reached_body || r.reached_body;
    timed_out = timed_out || r.timed_out;
  }

  for (auto& [t, cex] : wit) out.failing.emplace(cp.tags[t], std::move(cex));
  if (timed_out) {
    out.kind = VerdictKind::Timeout;
  } else if (!out.failing.empty()) {
    out.kind = VerdictKind::Failing;
  } else {
    out.kind = VerdictKind::Valid;
    out.vacuous = !reached_body;
  }
  return out;
}

namespace detail {
inline std::vector<Stmt> mask_asserts_rec(const std::vector<Stmt>& body, const std::string& keep) {
  std::vector<Stmt> res;
  for (const auto& st : body) {
    if (st.kind == StmtKind::Assert && st.tag != keep) {
      // keep the expression's value draws but never gate or fail
      res.push_back(assume_stmt(lor(st.expr, boolean(true))));
      continue;
    }
    Stmt s = st;
    if (st.kind == StmtKind::If || st.kind == StmtKind::While) {
      s.body = mask_asserts_rec(st.body, keep);
      s.else_body = mask_asserts_rec(st.else_body, keep);
    }
    res.push_back(std::move(s));
  }
  return res;
}
}  // namespace detail

// All asserts except `keep` become non-gating assume(e || true), mirroring
// how the sweep judges each assert independently.
inline Program mask_other_asserts(const Program& p, const std::string& keep) {
  Program out = p;
  out.body = detail::mask_asserts_rec(p.body, keep);
  return out;
}

// Replays a witness through the concrete interpreter: true iff the run fails
// exactly the witness's tag. Preconditions move to the front of the body as
// assumes because the interpreter does not evaluate them on its own, and the
// witness script covers any value they drew.
inline bool replay_counterexample(const Program& p, const Counterexample& cex) {
  Program q = mask_other_asserts(p, cex.tag);
  std::vector<Stmt> body;
  for (const auto& pre : q.preconditions) body.push_back(assume_stmt(pre));
  for (auto& st : q.body) body.push_back(std::move(st));
  q.body = std::move(body);
  q.preconditions.clear();
  auto script = cex.to_script();
  auto rng = SplitMix64::scripted(script);
  auto out = run_program(q, cex.params, rng);
  return out.status == RunStatus::AssertFailed && out.failed_tag == cex.tag;
}

}  // namespace mvl
