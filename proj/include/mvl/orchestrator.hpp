#pragma once

// Composes the refutation engines with the fixpoint. Each engine
// under-approximates the unprovable set, so seeding the shared pool can only
// shorten the fixpoint's road, never move its destination: every
// configuration proves the same set and differs only in how it gets there.
// Sequential configurations run engines to completion before the fixpoint
// starts; the parallel configuration runs everything at once with the pool as
// the only shared state, and cancels engines still running when the fixpoint
// terminates.

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mvl/dynrunner.hpp"
#include "mvl/houdini.hpp"

namespace mvl {

struct OrchestratorConfig {
  CheckerConfig checker;  // fixpoint and the slice/unroll engines
  DynConfig dyn;          // the dynamic engine
};

struct EngineReport {
  std::set<int> refuted;
  double duration = 0.0;   // seconds
  size_t published = 0;    // pool records this engine contributed
  std::string diagnostic;  // non-empty when the engine gave up or failed
};

struct RunResult {
  HoudiniResult houdini;
  std::map<EngineId, EngineReport> per_engine;
  double completion_time = 0.0;  // to fixpoint termination; engines may still run
};

namespace detail {

inline std::set<int> candidate_failures(const Verdict& v) {
  std::set<int> out;
  for (const auto& tag : v.failing_tags()) {
    int id = candidate_of_tag(tag);
    if (id >= 0) out.insert(id);
  }
  return out;
}

}  // namespace detail

// One refutation engine, standalone: the candidate ids it refutes plus its
// wall-clock cost. User-assert failures are never reported here — they belong
// to whole-program checking. Refutations reach `pool` (when given) as they
// are found; flipping `cancel` stops the engine at its next poll point. An
// engine that gives up (overflow, resource limits, cancellation) keeps
// whatever it already found and says why in the diagnostic; refuting nothing
// is always sound.
inline EngineReport run_engine(EngineId e, const Program& p,
                               const std::vector<Candidate>& candidates,
                               const OrchestratorConfig& cfg = {},
                               RefutationPool* pool = nullptr,
                               const std::atomic<bool>* cancel = nullptr) {
  if (e.kind == EngineId::H)
    throw std::invalid_argument("run_engine: H is the fixpoint, not a refutation engine");

  auto start = std::chrono::steady_clock::now();
  EngineReport rep;
  auto finish = [&] {
    rep.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
  };
  auto take = [&](const std::set<int>& ids) {
    rep.refuted = ids;
    if (pool)
      for (int id : ids) {
        pool->publish(id, e);
        ++rep.published;
      }
  };

  std::set<int> all;
  for (const auto& c : candidates) all.insert(c.id);

  CheckerConfig ccfg = cfg.checker;
  if (!ccfg.cancel) ccfg.cancel = cancel;

  switch (e.kind) {
    case EngineId::SBASE:
    case EngineId::SSTEP: {
      CutProgram cut = cut_loops(p, candidates, all);
      if (!cut.ok()) {
        rep.diagnostic = cut.error;
        return finish();
      }
      CutProgram sliced = e.kind == EngineId::SBASE ? slice_base(cut) : slice_step(cut);
      Verdict v = check_program(sliced.program, ccfg);
      if (v.kind == VerdictKind::Timeout || v.kind == VerdictKind::ResourceExceeded)
        rep.diagnostic = "check aborted";  // fail-safe: refute nothing
      else
        take(detail::candidate_failures(v));
      return finish();
    }
    case EngineId::LU: {
      std::string err;
      auto unrolled = unroll(p, e.depth, candidates, all, &err);
      if (!unrolled) {
        rep.diagnostic = err;
        return finish();
      }
      Verdict v = check_program(*unrolled, ccfg);
      if (v.kind == VerdictKind::Timeout || v.kind == VerdictKind::ResourceExceeded)
        rep.diagnostic = "check aborted";
      else
        take(detail::candidate_failures(v));
      return finish();
    }
    case EngineId::DYN: {
      std::function<void(int)> hook;
      if (pool)
        hook = [&](int id) {
          pool->publish(id, e);
          ++rep.published;
        };
      DynReport dr = dyn_refute(p, candidates, cfg.dyn, hook, cancel);
      rep.refuted = std::move(dr.refuted);
      rep.diagnostic = std::move(dr.diagnostic);
      return finish();
    }
    default:
      return finish();
  }
}

namespace detail {

inline void merge_report(RunResult& res, EngineId e, EngineReport&& r) {
  auto& slot = res.per_engine[e];
  slot.refuted.insert(r.refuted.begin(), r.refuted.end());
  slot.duration += r.duration;
  slot.published += r.published;
  if (!r.diagnostic.empty()) slot.diagnostic = std::move(r.diagnostic);
}

}  // namespace detail

// R;H: each prelude engine runs to completion and seeds the pool, then the
// fixpoint drains everything in its first round. completion_time is the sum
// of the engine durations and the fixpoint's. An empty prelude is the plain
// fixpoint baseline.
inline RunResult run_sequential(const std::vector<EngineId>& prelude, const Program& p,
                                const std::vector<Candidate>& candidates,
                                const OrchestratorConfig& cfg = {}) {
  RunResult res;
  RefutationPool pool;
  for (EngineId e : prelude) {
    EngineReport r = run_engine(e, p, candidates, cfg, &pool);
    res.completion_time += r.duration;
    detail::merge_report(res, e, std::move(r));
  }
  res.houdini = houdini_fixpoint(p, candidates, pool, cfg.checker);
  res.completion_time += res.houdini.check_time;
  return res;
}

// R1∥R2∥…∥H: engines and the fixpoint start together; engines publish into
// the pool as they refute and the fixpoint drains it at each round start.
// The result is recorded the moment the fixpoint terminates — engines may
// still be running and are cancelled then. An engine that throws is logged
// in its report and otherwise ignored; the fixpoint alone completes the run.
inline RunResult run_parallel(const std::vector<EngineId>& engines, const Program& p,
                              const std::vector<Candidate>& candidates,
                              const OrchestratorConfig& cfg = {}) {
  for (EngineId e : engines)
    if (e.kind == EngineId::H)
      throw std::invalid_argument("run_parallel: H runs implicitly, list only refutation engines");

  RunResult res;
  RefutationPool pool;
  std::atomic<bool> cancel{false};
  std::vector<EngineReport> reports(engines.size());
  std::vector<std::thread> threads;
  threads.reserve(engines.size());
  auto start = std::chrono::steady_clock::now();
  for (size_t i = 0; i < engines.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        reports[i] = run_engine(engines[i], p, candidates, cfg, &pool, &cancel);
      } catch (const std::exception& ex) {
        reports[i].diagnostic = ex.what();
      }
    });
  }

  try {
    res.houdini = houdini_fixpoint(p, candidates, pool, cfg.checker);
  } catch (...) {
    cancel.store(true);
    for (auto& t : threads) t.join();
    throw;
  }
  res.completion_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  cancel.store(true);
  for (auto& t : threads) t.join();
  for (size_t i = 0; i < engines.size(); ++i)
    detail::merge_report(res, engines[i], std::move(reports[i]));
  return res;
}

}  // namespace mvl
