#pragma once

// SMT-LIB2 (QF_BV) emission for loop-free programs, one script per assert
// tag, plus a thin subprocess harness for an external solver. The encoding
// is a passified forward pass: locals start as literal zeros, assignments
// rebind names to term DAG nodes, branches join through ite nodes, and every
// source of nondeterminism becomes a fresh unconstrained constant. Compound
// terms are hash-consed into define-funs so shared subexpressions stay
// shared in the script.

#include <unistd.h>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvl/checker.hpp"

namespace mvl {

enum class SolveStatus : uint8_t { Sat, Unsat, Unknown, Error };

namespace detail {

inline std::string smt_sanitize(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '_') ? c : '_');
  return out;
}

struct SmtBuilder {
  uint32_t width = 4;
  uint32_t mask = 15;
  std::vector<std::string> decls;
  std::vector<std::string> defs;
  std::map<std::string, std::string> cache;  // structural body -> def name
  std::map<std::string, bool> boolness;      // term name/text -> is Bool
  int defc = 0, freshc = 0;

  std::string bv_sort() const { return "(_ BitVec " + std::to_string(width) + ")"; }

  std::string lit_bv(uint32_t v) {
    std::string t = "(_ bv" + std::to_string(v & mask) + " " + std::to_string(width) + ")";
    boolness[t] = false;
    return t;
  }

  std::string lit_bool(bool v) {
    std::string t = v ? "true" : "false";
    boolness[t] = true;
    return t;
  }

  std::string fresh(const std::string& hint, bool is_bool) {
    std::string n = smt_sanitize(hint) + "_" + std::to_string(freshc++);
    decls.push_back("(declare-const " + n + " " + (is_bool ? "Bool" : bv_sort()) + ")");
    boolness[n] = is_bool;
    return n;
  }

  // hash-consed compound term; body must already reference term names
  std::string app(const std::string& body, bool is_bool) {
    auto it = cache.find(body);
    if (it != cache.end()) return it->second;
    std::string n = "e" + std::to_string(defc++);
    defs.push_back("(define-fun " + n + " () " + (is_bool ? "Bool" : bv_sort()) + " " + body + ")");
    cache.emplace(body, n);
    boolness[n] = is_bool;
    return n;
  }
};

struct SmtEmitter {
  const Program& p;
  std::string target;
  SmtBuilder b;
  std::map<std::string, std::string> env;   // program var -> term name
  std::vector<std::string> assumptions;     // Bool terms, in path order
  bool found = false;
  std::string target_guard;  // empty means true
  std::string target_term;

  SmtEmitter(const Program& prog, std::string tag) : p(prog), target(std::move(tag)) {
    b.width = p.bit_width;
    b.mask = p.mask();
  }

  std::string term(const ExprPtr& e) {
    switch (e->kind) {
      case ExprKind::BvLit: return b.lit_bv(e->literal);
      case ExprKind::BoolLit: return b.lit_bool(e->literal != 0);
      case ExprKind::Var: return env.at(e->name);
      case ExprKind::Ghost: return env.at(ghost_name(e->ghost, e->name));
      case ExprKind::ArrayRead:
        term(e->a);  // offsets never constrain the value read
        return b.fresh("rd_" + e->name, false);
      case ExprKind::Unary: return b.app("(not " + term(e->a) + ")", true);
      case ExprKind::Binary: break;
    }
    std::string a = term(e->a);
    std::string c = term(e->b);
    switch (e->op) {
      case Op::Add: return b.app("(bvadd " + a + " " + c + ")", false);
      case Op::Sub: return b.app("(bvsub " + a + " " + c + ")", false);
      case Op::Mul: return b.app("(bvmul " + a + " " + c + ")", false);
      case Op::UDiv: return b.app("(bvudiv " + a + " " + c + ")", false);
      case Op::URem:
        // our semantics: remainder by zero is all-ones; SMT's bvurem keeps
        // the dividend, so guard it
        return b.app("(ite (= " + c + " " + b.lit_bv(0) + ") " + b.lit_bv(b.mask) + " (bvurem " +
                         a + " " + c + "))",
                     false);
      case Op::Shl: return b.app("(bvshl " + a + " " + c + ")", false);
      case Op::LShr: return b.app("(bvlshr " + a + " " + c + ")", false);
      case Op::BitAnd: return b.app("(bvand " + a + " " + c + ")", false);
      case Op::BitOr: return b.app("(bvor " + a + " " + c + ")", false);
      case Op::BitXor: return b.app("(bvxor " + a + " " + c + ")", false);
      case Op::Eq: return b.app("(= " + a + " " + c + ")", true);
      case Op::Ne: return b.app("(distinct " + a + " " + c + ")", true);
      case Op::ULt: return b.app("(bvult " + a + " " + c + ")", true);
      case Op::ULe: return b.app("(bvule " + a + " " + c + ")", true);
      case Op::And: return b.app("(and " + a + " " + c + ")", true);
      case Op::Or: return b.app("(or " + a + " " + c + ")", true);
      case Op::Implies: return b.app("(=> " + a + " " + c + ")", true);
      case Op::Not: break;
    }
    throw std::logic_error("smt: unexpected operator");
  }

  std::string under(const std::string& guard, const std::string& t) {
    return guard.empty() ? t : b.app("(=> " + guard + " " + t + ")", true);
  }

  void walk(const std::vector<Stmt>& body, const std::string& guard) {
    for (const auto& st : body) {
      if (found) return;
      switch (st.kind) {
        case StmtKind::Assign:
          env[st.target] = term(st.expr);
          break;
        case StmtKind::Havoc:
          for (const auto& v : st.vars) env[v] = b.fresh("h_" + v, is_bool_scalar(p, v));
          break;
        case StmtKind::Assume:
          assumptions.push_back(under(guard, term(st.expr)));
          break;
        case StmtKind::Assert:
          if (st.tag == target) {
            found = true;
            target_guard = guard;
            target_term = term(st.expr);
            return;
          }
          break;  // other asserts are deleted: they never gate
        case StmtKind::If: {
          std::string g = term(st.expr);
          std::string not_g = b.app("(not " + g + ")", true);
          std::string g_then = guard.empty() ? g : b.app("(and " + guard + " " + g + ")", true);
          std::string g_else =
              guard.empty() ? not_g : b.app("(and " + guard + " " + not_g + ")", true);
          auto saved = env;
          walk(st.body, g_then);
          if (found) return;
          auto env_then = env;
          env = saved;
          walk(st.else_body, g_else);
          if (found) return;
          for (auto& [v, t_else] : env) {
            const std::string& t_then = env_then.at(v);
            if (t_then != t_else)
              t_else = b.app("(ite " + g + " " + t_then + " " + t_else + ")", b.boolness.at(t_else));
          }
          break;
        }
        case StmtKind::LogWrite:
        case StmtKind::LogRead: {
          bool wr = st.kind == StmtKind::LogWrite;
          std::string off = term(st.expr);
          std::string coin = b.fresh("lc_" + st.target, true);
          std::string hoc =
              ghost_name(wr ? GhostKind::WriteHasOccurred : GhostKind::ReadHasOccurred, st.target);
          std::string ofs =
              ghost_name(wr ? GhostKind::WriteOffset : GhostKind::ReadOffset, st.target);
          env[hoc] = b.app("(or " + coin + " " + env.at(hoc) + ")", true);
          env[ofs] = b.app("(ite " + coin + " " + off + " " + env.at(ofs) + ")", false);
          break;
        }
        case StmtKind::While:
          throw std::logic_error("smt: program contains a loop (cut or unroll it first)");
      }
    }
  }

  void init_env() {
    for (const auto& d : p.params) {
      std::string n = "p_" + smt_sanitize(d.name);
      b.decls.push_back("(declare-const " + n + " " +
                        (d.type == Type::Bool ? "Bool" : b.bv_sort()) + ")");
      b.boolness[n] = d.type == Type::Bool;
      env[d.name] = n;
    }
    for (const auto& d : p.locals)
      env[d.name] = d.type == Type::Bool ? b.lit_bool(false) : b.lit_bv(0);
    for (const auto& a : p.arrays) {
      env[ghost_name(GhostKind::WriteHasOccurred, a.name)] = b.lit_bool(false);
      env[ghost_name(GhostKind::WriteOffset, a.name)] = b.lit_bv(0);
      env[ghost_name(GhostKind::ReadHasOccurred, a.name)] = b.lit_bool(false);
      env[ghost_name(GhostKind::ReadOffset, a.name)] = b.lit_bv(0);
    }
  }

  std::string script(bool feasibility_only) {
    init_env();
    for (const auto& pre : p.preconditions) assumptions.push_back(term(pre));
    if (!feasibility_only) {
      walk(p.body, "");
      if (!found) throw std::invalid_argument("smt: no assert with tag '" + target + "'");
    }
    std::string out = "(set-logic QF_BV)\n";
    for (const auto& d : b.decls) out += d + "\n";
    for (const auto& d : b.defs) out += d + "\n";
    for (const auto& a : assumptions) out += "(assert " + a + ")\n";
    if (!feasibility_only) {
      if (!target_guard.empty()) out += "(assert " + target_guard + ")\n";
      out += "(assert (not " + target_term + "))\n";
    }
    out += "(check-sat)\n";
    return out;
  }
};

}  // namespace detail

// A self-contained QF_BV script that is satisfiable iff the tagged assert
// fails on some feasible path. Other asserts are deleted — they never gate
// the sweep, so per-tag verdicts match the enumerating checker.
inline std::string emit_smt(const Program& p, const std::string& tag) {
  detail::SmtEmitter em(p, tag);
  return em.script(false);
}

// Satisfiable iff some input passes the preconditions (the vacuity probe).
inline std::string emit_smt_feasibility(const Program& p) {
  detail::SmtEmitter em(p, "");
  return em.script(true);
}

// Runs `command < script-file` and reads the first sat/unsat/unknown token.
inline SolveStatus run_solver(const std::string& command, const std::string& script,
                              double timeout_seconds = 600.0) {
  char path[] = "/tmp/mvl_smt_XXXXXX";
  int fd = mkstemp(path);
  if (fd < 0) return SolveStatus::Error;
  {
    FILE* f = fdopen(fd, "w");
    if (!f) {
      close(fd);
      unlink(path);
      return SolveStatus::Error;
    }
    fwrite(script.data(), 1, script.size(), f);
    fclose(f);
  }
  std::string full;
  if (timeout_seconds > 0) full += "timeout " + std::to_string(timeout_seconds) + " ";
  full += command + " < " + path + " 2>/dev/null";
  FILE* out = popen(full.c_str(), "r");
  SolveStatus st = SolveStatus::Error;
  if (out) {
    char line[256];
    while (fgets(line, sizeof line, out)) {
      std::string s(line);
      while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
      if (s == "sat") { st = SolveStatus::Sat; break; }
      if (s == "unsat") { st = SolveStatus::Unsat; break; }
      if (s == "unknown") { st = SolveStatus::Unknown; break; }
    }
    pclose(out);
  }
  unlink(path);
  return st;
}

// Resolves the external solver command: "smt:<cmd>" carries it inline, bare
// "smt" falls back to the INVGEN_SOLVER environment variable.
inline std::string solver_command(const CheckerConfig& cfg) {
  if (cfg.backend.rfind("smt:", 0) == 0) {
    std::string c = cfg.backend.substr(4);
    if (!c.empty()) return c;
  }
  if (const char* e = std::getenv("INVGEN_SOLVER"))
    if (*e) return e;
  throw std::invalid_argument(
      "no SMT solver configured (use --backend smt:<command> or set INVGEN_SOLVER)");
}

inline bool solver_available(const std::string& command) {
  return run_solver(command, "(set-logic QF_BV)\n(check-sat)\n", 30.0) == SolveStatus::Sat;
}

// Per-tag solver sweep. sat refutes the tag; unknown (or a solver failure)
// refutes nothing and degrades the verdict to Timeout when it is the only
// obstacle to Valid. No witness values: SMT counterexamples carry the tag
// only.
inline Verdict failing_asserts_smt(const Program& p, const CheckerConfig& cfg) {
  std::string cmd = solver_command(cfg);
  Verdict v;
  v.state_space = state_space_size(p);
  bool inconclusive = false;
  std::vector<std::string> tags;
  collect_assert_tags(p.body, tags);
  for (const auto& tag : tags) {
    if (cfg.cancel && cfg.cancel->load(std::memory_order_relaxed)) {
      inconclusive = true;
      break;
    }
    auto st = run_solver(cmd, emit_smt(p, tag), cfg.timeout_seconds);
    if (st == SolveStatus::Sat) {
      Counterexample cex;
      cex.tag = tag;
      v.failing.emplace(tag, std::move(cex));
    } else if (st != SolveStatus::Unsat) {
      inconclusive = true;
    }
  }
  if (!v.failing.empty()) {
    v.kind = VerdictKind::Failing;
  } else if (inconclusive) {
    v.kind = VerdictKind::Timeout;
  } else {
    v.kind = VerdictKind::Valid;
    v.vacuous = run_solver(cmd, emit_smt_feasibility(p), cfg.timeout_seconds) == SolveStatus::Unsat;
  }
  return v;
}

// Backend dispatch: every consumer of check verdicts goes through here.
inline Verdict check_program(const Program& p, const CheckerConfig& cfg = {}) {
  if (cfg.backend.empty() || cfg.backend == "enumerate") return failing_asserts(p, cfg);
  if (cfg.backend == "smt" || cfg.backend.rfind("smt:", 0) == 0)
    return failing_asserts_smt(p, cfg);
  throw std::invalid_argument("unknown checker backend: " + cfg.backend);
}

}  // namespace mvl
