#pragma once

// The guess phase: a catalog of syntactic rules that propose candidate loop
// invariants. Each rule inspects a loop (its guard, body, surrounding
// initialisation, and the log sites it contains) and emits boolean
// expressions to be confirmed or refuted later. Output order is rule-major
// (rules in catalog order, loops in document order within each rule) and
// fully deterministic.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mvl/transforms.hpp"

namespace mvl {

struct RuleConfig {
  std::set<RuleId> enabled;     // rules allowed to emit; pragma included
  int per_rule_loop_cap = 64;   // max candidates one rule emits at one loop

  RuleConfig() {
    for (RuleId r : all_rules()) enabled.insert(r);
  }
};

namespace detail {

// a loop in document order together with its containing block, for
// initial-value lookups in the statements preceding it
struct LoopSite {
  const Stmt* loop = nullptr;
  const std::vector<Stmt>* block = nullptr;
  size_t index = 0;
};

inline void find_loop_sites(const std::vector<Stmt>& block, std::vector<LoopSite>& out) {
  for (size_t i = 0; i < block.size(); ++i) {
    const Stmt& st = block[i];
    if (st.kind == StmtKind::While) {
      out.push_back({&st, &block, i});
      find_loop_sites(st.body, out);
    } else if (st.kind == StmtKind::If) {
      find_loop_sites(st.body, out);
      find_loop_sites(st.else_body, out);
    }
  }
}

// the last assignment to v before the loop in the same block, provided no
// intervening statement can overwrite v
inline std::optional<ExprPtr> initial_value(const LoopSite& site, const std::string& v) {
  for (size_t i = site.index; i-- > 0;) {
    const Stmt& st = (*site.block)[i];
    if (st.kind == StmtKind::Assign && st.target == v) return st.expr;
    if (st.kind == StmtKind::Havoc &&
        std::find(st.vars.begin(), st.vars.end(), v) != st.vars.end())
      return std::nullopt;
    if (st.kind == StmtKind::If || st.kind == StmtKind::While) {
      if (compute_modset(st.body).count(v) || compute_modset(st.else_body).count(v))
        return std::nullopt;
    }
  }
  return std::nullopt;
}

inline void free_bv_vars(const ExprPtr& e, const std::map<std::string, Type>& types,
                         std::vector<std::string>& out, std::set<std::string>& seen) {
  switch (e->kind) {
    case ExprKind::Var: {
      auto it = types.find(e->name);
      if (it != types.end() && it->second == Type::Bv && seen.insert(e->name).second)
        out.push_back(e->name);
      return;
    }
    case ExprKind::ArrayRead:
    case ExprKind::Unary:
      free_bv_vars(e->a, types, out, seen);
      return;
    case ExprKind::Binary:
      free_bv_vars(e->a, types, out, seen);
      free_bv_vars(e->b, types, out, seen);
      return;
    default:
      return;
  }
}

// v := v + d / v := d + v / v := v - d with constant nonzero d
struct CounterUpdate {
  uint32_t stride = 0;
  bool adds = false;
};

inline std::optional<std::pair<std::string, CounterUpdate>> match_counter(const Stmt& st,
                                                                          uint32_t mask) {
  if (st.kind != StmtKind::Assign || st.expr->kind != ExprKind::Binary) return std::nullopt;
  const Expr& e = *st.expr;
  if (e.op != Op::Add && e.op != Op::Sub) return std::nullopt;
  const Expr* l = e.a.get();
  const Expr* r = e.b.get();
  auto is_self = [&](const Expr* x) { return x->kind == ExprKind::Var && x->name == st.target; };
  auto lit = [&](const Expr* x) -> std::optional<uint32_t> {
    if (x->kind != ExprKind::BvLit) return std::nullopt;
    return x->literal & mask;
  };
  if (e.op == Op::Add) {
    if (is_self(l))
      if (auto d = lit(r); d && *d != 0) return {{st.target, {*d, true}}};
    if (is_self(r))
      if (auto d = lit(l); d && *d != 0) return {{st.target, {*d, true}}};
  } else if (is_self(l)) {
    if (auto d = lit(r); d && *d != 0) return {{st.target, {*d, false}}};
  }
  return std::nullopt;
}

inline void find_counters(const std::vector<Stmt>& body, uint32_t mask,
                          std::map<std::string, CounterUpdate>& updates,
                          std::vector<std::string>& order) {
  for (const auto& st : body) {
    if (auto m = match_counter(st, mask)) {
      if (updates.emplace(m->first, m->second).second) order.push_back(m->first);
    }
    if (st.kind == StmtKind::If || st.kind == StmtKind::While) {
      find_counters(st.body, mask, updates, order);
      find_counters(st.else_body, mask, updates, order);
    }
  }
}

// v := v * 2 / 2 * v / v << 1 (doubling); v := v / 2 / v >> 1 (halving)
inline void find_pow2_updates(const std::vector<Stmt>& body, std::vector<std::string>& doubling,
                              std::vector<std::string>& halving, std::set<std::string>& seen_d,
                              std::set<std::string>& seen_h) {
  for (const auto& st : body) {
    if (st.kind == StmtKind::Assign && st.expr->kind == ExprKind::Binary) {
      const Expr& e = *st.expr;
      auto is_self = [&](const ExprPtr& x) {
        return x->kind == ExprKind::Var && x->name == st.target;
      };
      auto is_lit = [](const ExprPtr& x, uint32_t v) {
        return x->kind == ExprKind::BvLit && x->literal == v;
      };
      bool dbl = (e.op == Op::Mul && ((is_self(e.a) && is_lit(e.b, 2)) ||
                                      (is_lit(e.a, 2) && is_self(e.b)))) ||
                 (e.op == Op::Shl && is_self(e.a) && is_lit(e.b, 1));
      bool hlv = (e.op == Op::UDiv && is_self(e.a) && is_lit(e.b, 2)) ||
                 (e.op == Op::LShr && is_self(e.a) && is_lit(e.b, 1));
      if (dbl && seen_d.insert(st.target).second) doubling.push_back(st.target);
      if (hlv && seen_h.insert(st.target).second) halving.push_back(st.target);
    }
    if (st.kind == StmtKind::If || st.kind == StmtKind::While) {
      find_pow2_updates(st.body, doubling, halving, seen_d, seen_h);
      find_pow2_updates(st.else_body, doubling, halving, seen_d, seen_h);
    }
  }
}

inline ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& env) {
  switch (e->kind) {
    case ExprKind::Var: {
      auto it = env.find(e->name);
      return it != env.end() ? it->second : e;
    }
    case ExprKind::ArrayRead: return array_read(e->name, substitute(e->a, env));
    case ExprKind::Unary: return unary(e->op, substitute(e->a, env));
    case ExprKind::Binary: return binary(e->op, substitute(e->a, env), substitute(e->b, env));
    default: return e;
  }
}

struct LogSite {
  bool is_write = false;
  std::string array;
  ExprPtr offset;  // with in-body straight-line definitions inlined
};

inline void erase_modified(std::map<std::string, ExprPtr>& env, const std::set<std::string>& mods) {
  for (const auto& v : mods) env.erase(v);
}

inline void collect_log_sites(const std::vector<Stmt>& body, std::map<std::string, ExprPtr> env,
                              std::vector<LogSite>& out) {
  for (const auto& st : body) {
    switch (st.kind) {
      case StmtKind::Assign:
        env[st.target] = substitute(st.expr, env);
        break;
      case StmtKind::Havoc:
        for (const auto& v : st.vars) env.erase(v);
        break;
      case StmtKind::LogWrite:
      case StmtKind::LogRead:
        out.push_back({st.kind == StmtKind::LogWrite, st.target, substitute(st.expr, env)});
        break;
      case StmtKind::If: {
        collect_log_sites(st.body, env, out);
        collect_log_sites(st.else_body, env, out);
        erase_modified(env, compute_modset(st.body));
        erase_modified(env, compute_modset(st.else_body));
        break;
      }
      case StmtKind::While: {
        erase_modified(env, compute_modset(st.body));
        collect_log_sites(st.body, env, out);
        break;
      }
      default:
        break;
    }
  }
}

// a sum of: constants, bare variables, and constant-scaled variables
struct Addend {
  enum Kind { Const, BareVar, Scaled } kind = Const;
  uint32_t c = 0;
  std::string v;
};

inline bool flatten_sum(const ExprPtr& e, uint32_t width, std::vector<Addend>& out) {
  if (e->kind == ExprKind::Binary && e->op == Op::Add)
    return flatten_sum(e->a, width, out) && flatten_sum(e->b, width, out);
  if (e->kind == ExprKind::BvLit) {
    out.push_back({Addend::Const, e->literal, ""});
    return true;
  }
  if (e->kind == ExprKind::Var) {
    out.push_back({Addend::BareVar, 0, e->name});
    return true;
  }
  if (e->kind == ExprKind::Binary && e->op == Op::Mul) {
    const Expr* l = e->a.get();
    const Expr* r = e->b.get();
    if (l->kind == ExprKind::Var && r->kind == ExprKind::BvLit) {
      out.push_back({Addend::Scaled, r->literal, l->name});
      return true;
    }
    if (l->kind == ExprKind::BvLit && r->kind == ExprKind::Var) {
      out.push_back({Addend::Scaled, l->literal, r->name});
      return true;
    }
    return false;
  }
  if (e->kind == ExprKind::Binary && e->op == Op::Shl) {
    const Expr* l = e->a.get();
    const Expr* r = e->b.get();
    if (l->kind == ExprKind::Var && r->kind == ExprKind::BvLit && r->literal < width) {
      out.push_back({Addend::Scaled, 1u << r->literal, l->name});
      return true;
    }
    return false;
  }
  return false;
}

struct RuleGen {
  const Program& p;
  const RuleConfig& cfg;
  std::set<RuleId> effective;
  std::map<std::string, Type> types;
  std::map<std::string, const VarDecl*> params;
  std::vector<std::pair<std::string, uint32_t>> ult_preconds;  // v < C conjuncts
  std::vector<Candidate> out;
  std::map<RuleId, int> counts;
  std::set<std::string> program_read_arrays, program_written_arrays;

  // per-loop precomputed facts
  struct LoopFacts {
    const LoopSite* site = nullptr;
    std::string loop_id;
    std::vector<std::string> guard_vars;
    std::map<std::string, CounterUpdate> counters;
    std::vector<std::string> counter_order;
    std::vector<std::string> doubling, halving;
    std::vector<LogSite> logs;
    std::set<std::string> read_arrays, written_arrays;  // logged inside the body
  };
  std::vector<LoopFacts> loops;

  RuleGen(const Program& prog, const RuleConfig& config) : p(prog), cfg(config) {
    effective = cfg.enabled;
    for (const auto& name : p.disabled_rules)
      if (auto r = rule_from_name(name)) effective.erase(*r);
    for (const auto& d : p.params) {
      types[d.name] = d.type;
      params[d.name] = &d;
    }
    for (const auto& d : p.locals) types[d.name] = d.type;
    for (RuleId r : all_rules()) counts[r] = 0;
    collect_preconds();
    std::vector<LogSite> all;
    collect_log_sites(p.body, {}, all);
    for (const auto& l : all)
      (l.is_write ? program_written_arrays : program_read_arrays).insert(l.array);
  }

  void collect_preconds() {
    std::vector<const Expr*> conj;
    for (const auto& pre : p.preconditions) and_parts(pre, conj);
    for (const Expr* c : conj) {
      if (c->kind == ExprKind::Binary && c->op == Op::ULt && c->a->kind == ExprKind::Var &&
          c->b->kind == ExprKind::BvLit)
        ult_preconds.emplace_back(c->a->name, c->b->literal & p.mask());
    }
  }

  bool has_ult_precond(const std::string& v, uint32_t bound) const {
    for (const auto& [name, c] : ult_preconds)
      if (name == v && c == bound) return true;
    return false;
  }

  bool has_ult_precond_at_most(const std::string& v, uint32_t bound) const {
    for (const auto& [name, c] : ult_preconds)
      if (name == v && c <= bound) return true;
    return false;
  }

  bool is_thread_param(const std::string& v) const {
    auto it = params.find(v);
    return it != params.end() && it->second->thread_kind != ThreadParamKind::None;
  }

  void build_loop_facts(const std::vector<LoopSite>& sites) {
    for (const auto& site : sites) {
      LoopFacts f;
      f.site = &site;
      f.loop_id = site.loop->loop_id;

      std::set<std::string> seen;
      free_bv_vars(site.loop->expr, types, f.guard_vars, seen);
      find_counters(site.loop->body, p.mask(), f.counters, f.counter_order);
      for (const auto& v : f.counter_order)
        if (seen.insert(v).second) f.guard_vars.push_back(v);

      std::set<std::string> sd, sh;
      find_pow2_updates(site.loop->body, f.doubling, f.halving, sd, sh);
      collect_log_sites(site.loop->body, {}, f.logs);
      for (const auto& l : f.logs) (l.is_write ? f.written_arrays : f.read_arrays).insert(l.array);
      loops.push_back(std::move(f));
    }
  }

  // append unless an equal expression was already emitted by this rule at
  // this loop, and respect the per-rule/per-loop cap
  struct Emitter {
    RuleGen& g;
    RuleId rule;
    const LoopFacts& f;
    std::vector<ExprPtr> seen;
    void operator()(ExprPtr e) {
      if (static_cast<int>(seen.size()) >= g.cfg.per_rule_loop_cap) return;
      for (const auto& s : seen)
        if (expr_equal(s, e)) return;
      seen.push_back(e);
      Candidate c;
      c.rule = rule;
      c.loop_id = f.loop_id;
      c.expr = std::move(e);
      g.out.push_back(std::move(c));
      ++g.counts[rule];
    }
  };

  ExprPtr hoc_implies(const LogSite& l, ExprPtr rhs) const {
    GhostKind k = l.is_write ? GhostKind::WriteHasOccurred : GhostKind::ReadHasOccurred;
    return implies(ghost(k, l.array), std::move(rhs));
  }

  ExprPtr off_ghost(const LogSite& l) const {
    return ghost(l.is_write ? GhostKind::WriteOffset : GhostKind::ReadOffset, l.array);
  }

  void rule_pragma(const LoopFacts& f, Emitter& emit) {
    for (const auto& e : f.site->loop->candidate_pragmas) emit(e);
  }

  // offsets built from thread-component params break into per-component
  // equalities over the recorded offset: components peel off largest scale
  // first via /c and %c, provided each inner component is bounded below the
  // slot the outer scale leaves for it; when loop-varying terms share the
  // innermost slot, a bound on the innermost component adds a residue guess
  void rule_r0(const LoopFacts& f, Emitter& emit) {
    for (const auto& l : f.logs) {
      std::vector<Addend> sum;
      if (!flatten_sum(l.offset, p.bit_width, sum)) continue;
      std::vector<std::pair<uint32_t, std::string>> comps;
      bool leftover = false;
      for (const auto& a : sum) {
        uint32_t c = a.kind == Addend::Scaled ? (a.c & p.mask()) : 1;
        if (a.kind != Addend::Const && c != 0 && is_thread_param(a.v))
          comps.emplace_back(c, a.v);
        else
          leftover = true;
      }
      if (comps.empty()) continue;
      std::sort(comps.begin(), comps.end(),
                [](const auto& x, const auto& y) { return x.first > y.first; });
      bool shaped = true;
      for (size_t k = 0; k + 1 < comps.size() && shaped; ++k) {
        uint32_t outer = comps[k].first, inner = comps[k + 1].first;
        shaped = outer != inner && outer % inner == 0 &&
                 has_ult_precond_at_most(comps[k + 1].second, outer / inner);
      }
      if (!shaped) continue;
      ExprPtr q = off_ghost(l);
      for (const auto& [c, t] : comps) {
        emit(hoc_implies(l, eq(c == 1 ? q : udiv(q, bv(c)), var(t))));
        if (c != 1) q = urem(q, bv(c));
      }
      // residue guess: leftover terms occupy the innermost slot together
      // with the scale-1 component, so only a strict sub-bound separates it
      if (!leftover || comps.back().first != 1) continue;
      uint32_t slot = comps.size() >= 2 ? comps[comps.size() - 2].first : 0;
      for (const auto& [name, b] : ult_preconds)
        if (name == comps.back().second && b >= 2 && (slot == 0 || b < slot))
          emit(hoc_implies(l, eq(urem(q, bv(b)), var(name))));
    }
  }

  // strided offsets: all recorded offsets share the stride residue
  void rule_r1(const LoopFacts& f, Emitter& emit) {
    for (const auto& l : f.logs) {
      std::vector<Addend> sum;
      if (!flatten_sum(l.offset, p.bit_width, sum)) continue;
      const Addend* scaled = nullptr;
      uint32_t base = 0;
      bool ok = true;
      for (const auto& a : sum) {
        if (a.kind == Addend::Const) {
          base = (base + a.c) & p.mask();
        } else if (a.kind == Addend::Scaled && !scaled) {
          scaled = &a;
        } else {
          ok = false;
          break;
        }
      }
      if (!ok || !scaled) continue;
      uint32_t s = scaled->c & p.mask();
      if (s < 2) continue;
      emit(hoc_implies(l, eq(urem(off_ghost(l), bv(s)), bv(base % s))));
    }
  }

  // block-contiguous offsets C*b + i with i < C: lower and upper bounds
  void rule_r2_r3(const LoopFacts& f, Emitter& emit, bool upper) {
    for (const auto& l : f.logs) {
      std::vector<Addend> sum;
      if (!flatten_sum(l.offset, p.bit_width, sum)) continue;
      if (sum.size() != 2) continue;
      const Addend* scaled = nullptr;
      const Addend* bare = nullptr;
      for (const auto& a : sum) {
        if (a.kind == Addend::Scaled) scaled = &a;
        if (a.kind == Addend::BareVar) bare = &a;
      }
      if (!scaled || !bare) continue;
      uint32_t c = scaled->c & p.mask();
      if (c == 0 || !has_ult_precond(bare->v, c)) continue;
      ExprPtr lo = mul(bv(c), var(scaled->v));
      if (upper)
        emit(hoc_implies(l, ult(off_ghost(l), mul(bv(c), add(var(scaled->v), bv(1))))));
      else
        emit(hoc_implies(l, ule(std::move(lo), off_ghost(l))));
    }
  }

  void rule_r8(const LoopFacts& f, Emitter& emit) {
    for (const auto& v : f.guard_vars) emit(ule(bv(0), var(v)));
  }

  void rule_r9(const LoopFacts& f, Emitter& emit) {
    for (const auto& v : f.guard_vars) {
      auto init = initial_value(*f.site, v);
      if (!init) continue;
      emit(ule(*init, var(v)));
      emit(ule(var(v), *init));
    }
  }

  void rule_r10(const LoopFacts& f, Emitter& emit) {
    for (const auto& v : f.guard_vars) {
      auto it = f.counters.find(v);
      if (it == f.counters.end() || !it->second.adds) continue;
      auto init = initial_value(*f.site, v);
      if (!init) continue;
      uint32_t d = it->second.stride;
      emit(eq(urem(var(v), bv(d)), urem(*init, bv(d))));
    }
  }

  // arrays logged elsewhere in the program but not in this body are quiet
  // at this loop head
  void rule_r12_r13(const LoopFacts& f, Emitter& emit, bool writes) {
    for (const auto& a : p.arrays) {
      bool in_body = writes ? f.written_arrays.count(a.name) : f.read_arrays.count(a.name);
      if (in_body) continue;
      bool in_program =
          writes ? program_written_arrays.count(a.name) : program_read_arrays.count(a.name);
      if (!in_program) continue;
      GhostKind k = writes ? GhostKind::WriteHasOccurred : GhostKind::ReadHasOccurred;
      emit(eq(ghost(k, a.name), boolean(false)));
    }
  }

  ExprPtr pow2_disjunction(const std::string& v, bool include_zero) const {
    ExprPtr d = include_zero ? eq(var(v), bv(0)) : nullptr;
    for (uint32_t k = 0; k < p.bit_width; ++k) {
      ExprPtr term = eq(var(v), bv(1u << k));
      d = d ? lor(std::move(d), std::move(term)) : std::move(term);
    }
    return d;
  }

  void rule_r14_r15(const LoopFacts& f, Emitter& emit, bool include_zero) {
    std::set<std::string> seen;
    for (const auto& list : {f.doubling, f.halving})
      for (const auto& v : list)
        if (seen.insert(v).second) emit(pow2_disjunction(v, include_zero));
  }

  void rule_r17(const LoopFacts& f, Emitter& emit) {
    for (const auto& u : f.doubling) {
      auto iu = initial_value(*f.site, u);
      if (!iu) continue;
      for (const auto& v : f.halving) {
        if (u == v) continue;
        auto iv = initial_value(*f.site, v);
        if (!iv) continue;
        emit(eq(mul(var(u), var(v)), mul(*iu, *iv)));
      }
    }
  }

  void run() {
    std::vector<LoopSite> sites;
    find_loop_sites(p.body, sites);
    build_loop_facts(sites);

    for (RuleId r : all_rules()) {
      if (!effective.count(r)) continue;
      for (const auto& f : loops) {
        Emitter emit{*this, r, f, {}};
        switch (r) {
          case RuleId::pragma: rule_pragma(f, emit); break;
          case RuleId::r0: rule_r0(f, emit); break;
          case RuleId::r1: rule_r1(f, emit); break;
          case RuleId::r2: rule_r2_r3(f, emit, false); break;
          case RuleId::r3: rule_r2_r3(f, emit, true); break;
          case RuleId::r8: rule_r8(f, emit); break;
          case RuleId::r9: rule_r9(f, emit); break;
          case RuleId::r10: rule_r10(f, emit); break;
          case RuleId::r12: rule_r12_r13(f, emit, false); break;
          case RuleId::r13: rule_r12_r13(f, emit, true); break;
          case RuleId::r14: rule_r14_r15(f, emit, true); break;
          case RuleId::r15: rule_r14_r15(f, emit, false); break;
          case RuleId::r17: rule_r17(f, emit); break;
        }
      }
    }
    for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  }
};

}  // namespace detail

// All candidates the enabled rules propose for p, rule-major, ids sequential.
// Rules named in the program's own `disable` clause never emit.
inline std::vector<Candidate> generate_candidates(const Program& p, const RuleConfig& cfg = {}) {
  detail::RuleGen g(p, cfg);
  g.run();
  return std::move(g.out);
}

// Emitted-candidate counts per rule (zeros included for quiet rules).
inline std::map<RuleId, int> rule_trigger_report(const Program& p, const RuleConfig& cfg = {}) {
  detail::RuleGen g(p, cfg);
  g.run();
  return std::move(g.counts);
}

}  // namespace mvl
