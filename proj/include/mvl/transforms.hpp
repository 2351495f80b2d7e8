#pragma once

// Program-to-program transformations: loop cutting, base/step slicing,
// bounded unrolling, and single-assert instrumentation.

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mvl/ir.hpp"

namespace mvl {

// Every variable assigned or havocked anywhere in `body` (nested control flow
// included), plus the ghost variables of every array logged in it.
namespace detail {
inline void modset_rec(const std::vector<Stmt>& body, std::set<std::string>& out) {
  for (const auto& st : body) {
    switch (st.kind) {
      case StmtKind::Assign:
        out.insert(st.target);
        break;
      case StmtKind::Havoc:
        out.insert(st.vars.begin(), st.vars.end());
        break;
      case StmtKind::LogWrite:
        out.insert(ghost_name(GhostKind::WriteHasOccurred, st.target));
        out.insert(ghost_name(GhostKind::WriteOffset, st.target));
        break;
      case StmtKind::LogRead:
        out.insert(ghost_name(GhostKind::ReadHasOccurred, st.target));
        out.insert(ghost_name(GhostKind::ReadOffset, st.target));
        break;
      case StmtKind::If:
        modset_rec(st.body, out);
        modset_rec(st.else_body, out);
        break;
      case StmtKind::While:
        modset_rec(st.body, out);
        break;
      default:
        break;
    }
  }
}
}  // namespace detail

inline std::set<std::string> compute_modset(const std::vector<Stmt>& body) {
  std::set<std::string> out;
  detail::modset_rec(body, out);
  return out;
}

inline bool contains_while(const std::vector<Stmt>& body) {
  for (const auto& st : body) {
    if (st.kind == StmtKind::While) return true;
    if (st.kind == StmtKind::If &&
        (contains_while(st.body) || contains_while(st.else_body)))
      return true;
  }
  return false;
}

// Loops of `body` in document order (outer before inner, textual order).
inline void collect_loops(const std::vector<Stmt>& body, std::vector<const Stmt*>& out) {
  for (const auto& st : body) {
    if (st.kind == StmtKind::While) {
      out.push_back(&st);
      collect_loops(st.body, out);
    } else if (st.kind == StmtKind::If) {
      collect_loops(st.body, out);
      collect_loops(st.else_body, out);
    }
  }
}

inline std::vector<const Stmt*> collect_loops(const Program& p) {
  std::vector<const Stmt*> out;
  collect_loops(p.body, out);
  return out;
}

inline void collect_assert_tags(const std::vector<Stmt>& body, std::vector<std::string>& out) {
  for (const auto& st : body) {
    if (st.kind == StmtKind::Assert) out.push_back(st.tag);
    if (st.kind == StmtKind::If || st.kind == StmtKind::While) {
      collect_assert_tags(st.body, out);
      collect_assert_tags(st.else_body, out);
    }
  }
}

// A loop-cut program: every While replaced by an assert/havoc/assume/guarded-
// body sequence. check_sites records which assert tags check each candidate.
struct CutProgram {
  Program program;
  // candidate id -> (base assert tag, step assert tag) at its owning loop
  std::map<int, std::pair<std::string, std::string>> check_sites;
  // candidate id -> loop at whose havoc site it is assumed (active candidates)
  std::map<int, std::string> assume_sites;
  std::set<std::string> base_tags, step_tags;  // tags of cut-inserted asserts
  std::string error;                           // empty on success
  bool ok() const { return error.empty(); }
};

// Candidate ids are embedded in cut/unroll assert tags as a trailing ":c<id>".
// Returns the id, or -1 for tags that do not check a candidate.
inline int candidate_of_tag(const std::string& tag) {
  auto pos = tag.rfind(':');
  if (pos == std::string::npos) return -1;
  std::string last = tag.substr(pos + 1);
  if (last.size() < 2 || last[0] != 'c') return -1;
  for (size_t i = 1; i < last.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(last[i]))) return -1;
  return std::stoi(last.substr(1));
}

namespace detail {

struct Cutter {
  const std::vector<Candidate>& candidates;
  const std::set<int>& active;
  CutProgram& out;

  std::vector<const Candidate*> loop_cands(const std::string& loop_id) const {
    std::vector<const Candidate*> cs;
    for (const auto& c : candidates)
      if (c.loop_id == loop_id) cs.push_back(&c);
    return cs;
  }

  std::vector<Stmt> cut_list(const std::vector<Stmt>& body) {
    std::vector<Stmt> res;
    for (const auto& st : body) {
      if (st.kind == StmtKind::If) {
        Stmt s = st;
        s.body = cut_list(st.body);
        s.else_body = cut_list(st.else_body);
        res.push_back(std::move(s));
      } else if (st.kind == StmtKind::While) {
        auto mods = compute_modset(st.body);
        auto inner = cut_list(st.body);  // innermost loops first
        emit_cut(st, mods, std::move(inner), res);
      } else {
        res.push_back(st);
      }
    }
    return res;
  }

  void emit_cut(const Stmt& loop, const std::set<std::string>& mods,
                std::vector<Stmt> inner, std::vector<Stmt>& dst) {
    auto cs = loop_cands(loop.loop_id);
    for (const Candidate* c : cs) {
      std::string base = "base:" + loop.loop_id + ":c" + std::to_string(c->id);
      std::string step = "step:" + loop.loop_id + ":c" + std::to_string(c->id);
      out.check_sites[c->id] = {base, step};
    }

    auto asserts_for = [&](const char* phase) {
      std::vector<Stmt> v;
      std::string pre = std::string(phase) + ":" + loop.loop_id + ":";
      auto& tagset = std::string(phase) == "base" ? out.base_tags : out.step_tags;
      int ui = 0;
      for (const auto& inv : loop.invariants) {
        std::string t = pre + "u" + std::to_string(ui++);
        tagset.insert(t);
        v.push_back(assert_stmt(inv.expr, t));
      }
      for (const Candidate* c : cs) {
        if (!active.count(c->id)) continue;
        std::string t = pre + "c" + std::to_string(c->id);
        tagset.insert(t);
        v.push_back(assert_stmt(c->expr, t));
      }
      return v;
    };

    for (auto& s : asserts_for("base")) dst.push_back(std::move(s));
    dst.push_back(havoc(std::vector<std::string>(mods.begin(), mods.end())));
    for (const auto& inv : loop.invariants) dst.push_back(assume_stmt(inv.expr));
    for (const Candidate* c : cs) {
      if (!active.count(c->id)) continue;
      dst.push_back(assume_stmt(c->expr));
      out.assume_sites[c->id] = loop.loop_id;
    }

    std::vector<Stmt> guarded = std::move(inner);
    for (auto& s : asserts_for("step")) guarded.push_back(std::move(s));
    guarded.push_back(assume_stmt(boolean(false)));
    dst.push_back(if_stmt(loop.expr, std::move(guarded)));
  }
};

inline std::vector<Stmt> drop_asserts(const std::vector<Stmt>& body,
                                      const std::set<std::string>& tags) {
  std::vector<Stmt> res;
  for (const auto& st : body) {
    if (st.kind == StmtKind::Assert && tags.count(st.tag)) continue;
    Stmt s = st;
    if (st.kind == StmtKind::If || st.kind == StmtKind::While) {
      s.body = drop_asserts(st.body, tags);
      s.else_body = drop_asserts(st.else_body, tags);
    }
    res.push_back(std::move(s));
  }
  return res;
}

}  // namespace detail

// Replace every loop, innermost-first, by:
//   assert user invariants + active candidates   (base tags)
//   havoc modset(body)
//   assume user invariants + active candidates
//   if (guard) { cut body; assert ... (step tags); assume false; }
inline CutProgram cut_loops(const Program& p, const std::vector<Candidate>& candidates,
                            const std::set<int>& active) {
  CutProgram out;
  std::set<std::string> loop_ids;
  for (const Stmt* l : collect_loops(p)) loop_ids.insert(l->loop_id);
  for (const auto& c : candidates) {
    if (!loop_ids.count(c.loop_id)) {
      out.error = "unknown candidate loop id: " + c.loop_id;
      return out;
    }
  }
  detail::Cutter cutter{candidates, active, out};
  out.program = p;
  out.program.body = cutter.cut_list(p.body);
  return out;
}

// Keep only the base-case checks: delete every step-tag assert.
inline CutProgram slice_base(const CutProgram& c) {
  CutProgram out = c;
  out.program.body = detail::drop_asserts(c.program.body, c.step_tags);
  return out;
}

// Keep only the step-case checks: delete every base-tag assert.
inline CutProgram slice_step(const CutProgram& c) {
  CutProgram out = c;
  out.program.body = detail::drop_asserts(c.program.body, c.base_tags);
  return out;
}

inline constexpr int kUnrollStmtLimit = 50000;

namespace detail {

struct Unroller {
  const std::vector<Candidate>& candidates;
  const std::set<int>& active;
  int k;
  int stmt_count = 0;
  bool overflow = false;

  void bump() {
    if (++stmt_count > kUnrollStmtLimit) overflow = true;
  }

  std::vector<Stmt> expand(const std::vector<Stmt>& body, const std::string& prefix) {
    std::vector<Stmt> res;
    for (const auto& st : body) {
      if (overflow) return res;
      switch (st.kind) {
        case StmtKind::Assert: {
          bump();
          res.push_back(assert_stmt(st.expr, prefix + st.tag));
          break;
        }
        case StmtKind::If: {
          bump();
          Stmt s = st;
          s.body = expand(st.body, prefix);
          s.else_body = expand(st.else_body, prefix);
          res.push_back(std::move(s));
          break;
        }
        case StmtKind::While:
          res.push_back(expand_loop(st, prefix));
          break;
        default:
          bump();
          res.push_back(st);
          break;
      }
    }
    return res;
  }

  Stmt expand_loop(const Stmt& loop, const std::string& prefix) {
    std::vector<const Candidate*> cs;
    for (const auto& c : candidates)
      if (c.loop_id == loop.loop_id && active.count(c.id)) cs.push_back(&c);

    bump();
    Stmt nested = if_stmt(loop.expr, {assume_stmt(boolean(false))});
    for (int i = k; i >= 1 && !overflow; --i) {
      std::string pre = prefix + "lu:" + std::to_string(i) + ":" + loop.loop_id + ":";
      std::vector<Stmt> content;
      int ui = 0;
      for (const auto& inv : loop.invariants) {
        bump();
        content.push_back(assert_stmt(inv.expr, pre + "u" + std::to_string(ui++)));
      }
      for (const Candidate* c : cs) {
        bump();
        content.push_back(assert_stmt(c->expr, pre + "c" + std::to_string(c->id)));
      }
      auto b = expand(loop.body, pre);
      for (auto& s : b) content.push_back(std::move(s));
      content.push_back(std::move(nested));
      bump();
      nested = if_stmt(loop.expr, std::move(content));
    }
    return nested;
  }
};

}  // namespace detail

// Bounded unrolling: each loop becomes k nested
//   if (guard) { assert invariants+candidates; body; ... }
// layers with an innermost if (guard) { assume false }. Executions needing
// more than k iterations of a loop are silently blocked, so a failure found
// here is a real failure of some <=k-iteration run, but validity proves
// nothing. Asserts copied into iteration i of loop L get an "lu:i:L:" tag
// prefix so every unrolled tag stays unique and candidate-attributable.
inline std::optional<Program> unroll(const Program& p, int k,
                                     const std::vector<Candidate>& candidates,
                                     const std::set<int>& active,
                                     std::string* error = nullptr) {
  if (k < 1) {
    if (error) *error = "unroll depth must be >= 1";
    return std::nullopt;
  }
  detail::Unroller u{candidates, active, k};
  Program out = p;
  out.body = u.expand(p.body, "");
  if (u.overflow) {
    if (error)
      *error = "unrolled program exceeds " + std::to_string(kUnrollStmtLimit) +
               " statements";
    return std::nullopt;
  }
  return out;
}

namespace detail {
inline std::vector<Stmt> isolate_assert(const std::vector<Stmt>& body,
                                        const std::string& site, bool& found) {
  std::vector<Stmt> res;
  for (const auto& st : body) {
    if (st.kind == StmtKind::Assert) {
      if (st.tag == site) {
        found = true;
        res.push_back(st);
      } else {
        res.push_back(assume_stmt(st.expr));
      }
      continue;
    }
    Stmt s = st;
    if (st.kind == StmtKind::If || st.kind == StmtKind::While) {
      s.body = isolate_assert(st.body, site, found);
      s.else_body = isolate_assert(st.else_body, site, found);
    }
    res.push_back(std::move(s));
  }
  return res;
}
}  // namespace detail

// Keep the assert tagged `site`; every other assert becomes an assume.
inline std::optional<Program> instrument_assert(const Program& p, const std::string& site,
                                                std::string* error = nullptr) {
  bool found = false;
  Program out = p;
  out.body = detail::isolate_assert(p.body, site, found);
  if (!found) {
    if (error) *error = "unknown assert tag: " + site;
    return std::nullopt;
  }
  return out;
}

}  // namespace mvl
