#pragma once

// The confirmation phase: iteratively removes refuted candidates until the
// survivors form an inductive invariant. The fixpoint is unique and maximal,
// so external refutation engines can only shorten the road, never change the
// destination. They hand in their findings through a shared append-only pool
// that the fixpoint drains at each round boundary.

#include <chrono>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mvl/smt.hpp"
#include "mvl/transforms.hpp"

namespace mvl {

struct EngineId {
  enum Kind : uint8_t { H, SBASE, SSTEP, LU, DYN };
  Kind kind = H;
  int depth = 1;  // LU unroll depth; ignored elsewhere

  friend bool operator==(const EngineId& a, const EngineId& b) {
    return a.kind == b.kind && (a.kind != LU || a.depth == b.depth);
  }
  friend bool operator<(const EngineId& a, const EngineId& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.kind == LU && a.depth < b.depth;
  }
};

inline std::string engine_name(EngineId e) {
  switch (e.kind) {
    case EngineId::H: return "H";
    case EngineId::SBASE: return "SBASE";
    case EngineId::SSTEP: return "SSTEP";
    case EngineId::LU: return "LU(" + std::to_string(e.depth) + ")";
    case EngineId::DYN: return "DYN";
  }
  return "?";
}

inline std::optional<EngineId> engine_from_name(const std::string& s) {
  if (s == "H") return EngineId{EngineId::H, 1};
  if (s == "SBASE") return EngineId{EngineId::SBASE, 1};
  if (s == "SSTEP") return EngineId{EngineId::SSTEP, 1};
  if (s == "DYN") return EngineId{EngineId::DYN, 1};
  if (s.rfind("LU(", 0) == 0 && s.size() > 4 && s.back() == ')') {
    int d = 0;
    for (size_t i = 3; i + 1 < s.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
      d = d * 10 + (s[i] - '0');
    }
    if (d >= 1) return EngineId{EngineId::LU, d};
  }
  return std::nullopt;
}

struct RefutationRecord {
  int candidate = -1;
  EngineId engine;
  double offset_seconds = 0.0;  // since pool creation
};

// Append-only set of refutations shared between engines and the fixpoint.
// Duplicates are allowed; the first record for an id wins attribution.
class RefutationPool {
 public:
  RefutationPool() : origin_(std::chrono::steady_clock::now()) {}

  void publish(int candidate, EngineId engine) {
    std::lock_guard<std::mutex> lk(mu_);
    double off = std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
    records_.push_back({candidate, engine, off});
  }

  // records appended since cursor, advancing it
  std::vector<RefutationRecord> drain(size_t& cursor) const {
    std::lock_guard<std::mutex> lk(mu_);
    std::vector<RefutationRecord> out(records_.begin() + static_cast<long>(cursor),
                                      records_.end());
    cursor = records_.size();
    return out;
  }

  std::vector<RefutationRecord> snapshot() const {
    std::lock_guard<std::mutex> lk(mu_);
    return records_;
  }

  size_t size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return records_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<RefutationRecord> records_;
  std::chrono::steady_clock::time_point origin_;
};

struct Refutation {
  int candidate = -1;
  int round = 0;       // 1-based round in which the candidate was dropped
  EngineId engine;     // H for the fixpoint's own refutations
};

struct HoudiniResult {
  std::set<int> proved;
  std::vector<Refutation> refuted;  // round indices weakly increase
  int rounds = 0;                   // includes the final clean round
  double check_time = 0.0;          // seconds, whole fixpoint + final verification
  Verdict verdict_after;            // whole program with proved invariants installed
};

// p with the chosen candidates appended to their loops' invariant lists
inline Program install_invariants(const Program& p, const std::vector<Candidate>& candidates,
                                  const std::set<int>& ids) {
  Program out = p;
  struct Walker {
    const std::vector<Candidate>& cs;
    const std::set<int>& ids;
    void walk(std::vector<Stmt>& body) const {
      for (auto& st : body) {
        if (st.kind == StmtKind::While) {
          for (const auto& c : cs)
            if (ids.count(c.id) && c.loop_id == st.loop_id)
              st.invariants.push_back({c.expr, "c" + std::to_string(c.id)});
          walk(st.body);
        } else if (st.kind == StmtKind::If) {
          walk(st.body);
          walk(st.else_body);
        }
      }
    }
  };
  Walker{candidates, ids}.walk(out.body);
  return out;
}

// Drops candidates until none is refutable: drain the pool, check the cut
// program, deactivate every candidate owning a failing tag, repeat. The
// surviving set is the unique maximal inductive one regardless of what the
// pool contributed or in which order refutations arrived. The timeout covers
// the entire fixpoint; on expiry the partial refutation log is kept and
// verdict_after reports Timeout.
inline HoudiniResult houdini_fixpoint(const Program& p, const std::vector<Candidate>& candidates,
                                      RefutationPool& pool, const CheckerConfig& cfg = {}) {
  auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  HoudiniResult res;
  std::set<int> active;
  for (const auto& c : candidates) active.insert(c.id);
  size_t cursor = 0;

  auto bail = [&](VerdictKind kind) {
    res.proved = active;  // best knowledge so far, unverified
    res.verdict_after = Verdict{};
    res.verdict_after.kind = kind;
    res.check_time = elapsed();
    return res;
  };

  for (;;) {
    ++res.rounds;
    for (const auto& rec : pool.drain(cursor))
      if (active.erase(rec.candidate)) res.refuted.push_back({rec.candidate, res.rounds, rec.engine});

    CutProgram cut = cut_loops(p, candidates, active);
    if (!cut.ok()) throw std::invalid_argument("houdini_fixpoint: " + cut.error);

    CheckerConfig rcfg = cfg;
    rcfg.timeout_seconds = cfg.timeout_seconds - elapsed();
    if (rcfg.timeout_seconds <= 0) return bail(VerdictKind::Timeout);
    Verdict v = check_program(cut.program, rcfg);
    if (v.kind == VerdictKind::Timeout || v.kind == VerdictKind::ResourceExceeded)
      return bail(v.kind);

    std::set<int> newly;
    for (const auto& tag : v.failing_tags()) {
      int id = candidate_of_tag(tag);
      if (id >= 0 && active.count(id)) newly.insert(id);
    }
    if (newly.empty()) break;
    for (int id : newly) {
      active.erase(id);
      res.refuted.push_back({id, res.rounds, EngineId{EngineId::H, 1}});
    }
  }

  res.proved = active;
  Program installed = install_invariants(p, candidates, active);
  CutProgram final_cut = cut_loops(installed, {}, {});
  if (!final_cut.ok()) throw std::invalid_argument("houdini_fixpoint: " + final_cut.error);

  CheckerConfig rcfg = cfg;
  rcfg.timeout_seconds = cfg.timeout_seconds - elapsed();
  if (rcfg.timeout_seconds <= 0) return bail(VerdictKind::Timeout);
  res.verdict_after = check_program(final_cut.program, rcfg);
  res.check_time = elapsed();
  return res;
}

inline HoudiniResult houdini_fixpoint(const Program& p, const std::vector<Candidate>& candidates,
                                      const CheckerConfig& cfg = {}) {
  RefutationPool pool;
  return houdini_fixpoint(p, candidates, pool, cfg);
}

inline bool is_provable(const Program& p, const std::vector<Candidate>& candidates, int c,
                        const CheckerConfig& cfg = {}) {
  return houdini_fixpoint(p, candidates, cfg).proved.count(c) > 0;
}

}  // namespace mvl
