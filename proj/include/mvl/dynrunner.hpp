#pragma once

// The dynamic refutation engine: runs the original program on random inputs
// that satisfy the preconditions and drops every candidate observed false at
// a loop head. Anything it refutes is genuinely unprovable, because a
// concrete execution only ever visits reachable states.

#include <atomic>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mvl/ir.hpp"

namespace mvl {

struct DynConfig {
  uint64_t seed = 0;
  int max_executions = 5;
  uint64_t loop_iteration_budget = 1000;  // summed across all loops, per run
  int tuple_samples = 5;                  // distinct logged offsets per evaluation
  double coverage_target = 1.0;           // stop once this block coverage is reached
  int rejection_attempts = 10000;         // input-sampling bound per execution
};

struct DynReport {
  std::set<int> refuted;
  int executions = 0;
  double coverage = 0.0;
  uint64_t interpreted_statements = 0;
  std::string diagnostic;  // non-empty when input generation gave up
};

inline double basic_block_coverage(const Program& p, const std::vector<std::vector<int>>& traces) {
  std::set<int> seen;
  for (const auto& t : traces) seen.insert(t.begin(), t.end());
  return static_cast<double>(seen.size()) / count_blocks(p);
}

namespace detail {

struct DynTracked {
  const Candidate* c = nullptr;
  // set when the expression is `has_occurred(A) ==> P`: P is then evaluated
  // against sampled observed offsets instead of the interpreter's ghost state
  bool ghost_conditional = false;
  std::string array;
  GhostKind hoc_kind = GhostKind::WriteHasOccurred;
  GhostKind off_kind = GhostKind::WriteOffset;
};

struct DynState {
  const Program* p = nullptr;
  std::map<std::string, std::vector<DynTracked>> by_loop;
  std::set<int>* refuted = nullptr;
  const std::function<void(int)>* on_refuted = nullptr;

  void drop(int id) {
    refuted->insert(id);
    if (on_refuted && *on_refuted) (*on_refuted)(id);
  }
  // distinct logged offsets per (array, is_write), in observation order
  std::map<std::pair<std::string, bool>, std::vector<uint32_t>> observed;
  std::map<std::pair<std::string, bool>, std::set<uint32_t>> observed_set;
  SplitMix64* sample_rng = nullptr;
  int tuple_samples = 5;

  static void on_log(void* ctx, const Stmt& log, uint32_t offset) {
    auto& self = *static_cast<DynState*>(ctx);
    std::pair<std::string, bool> key{log.target, log.kind == StmtKind::LogWrite};
    if (self.observed_set[key].insert(offset).second) self.observed[key].push_back(offset);
  }

  static void on_loop_head(void* ctx, const Stmt& loop, const ExecState& s) {
    auto& self = *static_cast<DynState*>(ctx);
    auto it = self.by_loop.find(loop.loop_id);
    if (it == self.by_loop.end()) return;
    uint32_t width = self.p->bit_width;
    for (const auto& t : it->second) {
      if (self.refuted->count(t.c->id)) continue;
      if (!t.ghost_conditional) {
        if (!eval_expr(t.c->expr, s.env, width, nullptr)) self.drop(t.c->id);
        continue;
      }
      auto oit = self.observed.find({t.array, t.hoc_kind == GhostKind::WriteHasOccurred});
      if (oit == self.observed.end() || oit->second.empty()) continue;  // vacuously true
      std::vector<uint32_t> sample = oit->second;
      if (static_cast<int>(sample.size()) > self.tuple_samples) {
        // partial Fisher-Yates: draw tuple_samples offsets without replacement
        for (int i = 0; i < self.tuple_samples; ++i) {
          size_t j = i + static_cast<size_t>(self.sample_rng->below(sample.size() - i));
          std::swap(sample[i], sample[j]);
        }
        sample.resize(self.tuple_samples);
      }
      for (uint32_t off : sample) {
        auto env = s.env;
        env[ghost_name(t.hoc_kind, t.array)] = 1;
        env[ghost_name(t.off_kind, t.array)] = off;
        if (!eval_expr(t.c->expr, env, width, nullptr)) {
          self.drop(t.c->id);
          break;
        }
      }
    }
  }
};

inline DynTracked classify_candidate(const Candidate& c) {
  DynTracked t;
  t.c = &c;
  const Expr& e = *c.expr;
  if (e.kind == ExprKind::Binary && e.op == Op::Implies && e.a->kind == ExprKind::Ghost &&
      ghost_kind_is_bool(e.a->ghost)) {
    t.ghost_conditional = true;
    t.array = e.a->name;
    t.hoc_kind = e.a->ghost;
    t.off_kind = (t.hoc_kind == GhostKind::WriteHasOccurred) ? GhostKind::WriteOffset
                                                             : GhostKind::ReadOffset;
  }
  return t;
}

}  // namespace detail

// Runs p on up to max_executions precondition-satisfying inputs and refutes
// every candidate seen false at a loop head of its own loop. Candidates of
// the form has_occurred(A) ==> P are judged against up to tuple_samples
// distinct observed offsets of A (all of them when fewer were seen). A fixed
// seed yields an identical report. on_refuted, when set, fires once per
// candidate the moment it is dropped; cancel, when set and flipped true,
// stops before the next execution.
inline DynReport dyn_refute(const Program& p, const std::vector<Candidate>& candidates,
                            const DynConfig& cfg = {},
                            const std::function<void(int)>& on_refuted = {},
                            const std::atomic<bool>* cancel = nullptr) {
  DynReport rep;
  detail::DynState st;
  st.p = &p;
  st.refuted = &rep.refuted;
  st.on_refuted = &on_refuted;
  st.tuple_samples = cfg.tuple_samples;
  for (const auto& c : candidates) st.by_loop[c.loop_id].push_back(detail::classify_candidate(c));

  // `param == literal` preconditions are pinned instead of sampled
  std::map<std::string, uint32_t> pins;
  for (const auto& pre : p.preconditions) {
    std::vector<const Expr*> conj;
    detail::and_parts(pre, conj);
    for (const Expr* e : conj) {
      if (e->kind == ExprKind::Binary && e->op == Op::Eq && e->a->kind == ExprKind::Var &&
          (e->b->kind == ExprKind::BvLit || e->b->kind == ExprKind::BoolLit))
        pins[e->a->name] = e->b->kind == ExprKind::BvLit ? (e->b->literal & p.mask())
                                                         : (e->b->literal ? 1 : 0);
    }
  }

  const uint32_t mask = p.mask();
  const int total_blocks = count_blocks(p);
  std::set<int> covered;

  for (int exec = 0; exec < cfg.max_executions; ++exec) {
    if (cancel && cancel->load(std::memory_order_relaxed)) break;
    SplitMix64 run_rng = SplitMix64::split(cfg.seed, 2 * static_cast<uint64_t>(exec));
    SplitMix64 sample_rng = SplitMix64::split(cfg.seed, 2 * static_cast<uint64_t>(exec) + 1);
    st.sample_rng = &sample_rng;
    st.observed.clear();
    st.observed_set.clear();

    std::map<std::string, uint32_t> inputs;
    bool found = false;
    for (int attempt = 0; attempt < cfg.rejection_attempts && !found; ++attempt) {
      inputs.clear();
      for (const auto& d : p.params) {
        auto pin = pins.find(d.name);
        if (pin != pins.end())
          inputs[d.name] = pin->second;
        else
          inputs[d.name] = d.type == Type::Bool
                               ? static_cast<uint32_t>(run_rng.below(2))
                               : static_cast<uint32_t>(run_rng.below(uint64_t(mask) + 1));
      }
      found = true;
      for (const auto& pre : p.preconditions)
        if (!eval_expr(pre, inputs, p.bit_width, nullptr)) {
          found = false;
          break;
        }
    }
    if (!found) {
      rep.diagnostic = "no precondition-satisfying input found after " +
                       std::to_string(cfg.rejection_attempts) + " attempts";
      break;
    }

    RunHooks hooks;
    hooks.on_loop_head = &detail::DynState::on_loop_head;
    hooks.on_log = &detail::DynState::on_log;
    hooks.ctx = &st;
    auto outcome = run_program(p, inputs, run_rng, cfg.loop_iteration_budget, hooks);

    ++rep.executions;
    rep.interpreted_statements += outcome.interpreted_statements;
    covered.insert(outcome.state.trace.begin(), outcome.state.trace.end());
    rep.coverage = static_cast<double>(covered.size()) / total_blocks;
    if (rep.coverage >= cfg.coverage_target) break;
  }
  return rep;
}

}  // namespace mvl
