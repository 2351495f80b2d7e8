#pragma once

// Text format for MVL programs. parse() and pretty_print() round-trip:
// parse(pretty_print(p)) is structurally identical to p for any program that
// typechecks.

#include <cctype>
#include <cstring>
#include <sstream>

#include "mvl/ir.hpp"

namespace mvl {

struct ParseResult {
  std::optional<Program> program;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return program.has_value(); }
};

namespace detail {

enum class Tok : uint8_t { Ident, Int, Sym, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1, col = 1;
};

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;
  std::vector<Diagnostic>& diags;

  Lexer(const std::string& s, std::vector<Diagnostic>& d) : src(s), diags(d) {}

  void advance(size_t n) {
    for (size_t i = 0; i < n && pos < src.size(); ++i, ++pos) {
      if (src[pos] == '\n') { ++line; col = 1; } else { ++col; }
    }
  }

  void skip_ws() {
    for (;;) {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) advance(1);
      if (pos + 1 < src.size() && src[pos] == '/' && src[pos + 1] == '/') {
        while (pos < src.size() && src[pos] != '\n') advance(1);
        continue;
      }
      break;
    }
  }

  Token next() {
    skip_ws();
    Token t;
    t.line = line;
    t.col = col;
    if (pos >= src.size()) return t;
    char c = src[pos];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
        advance(1);
      t.kind = Tok::Ident;
      t.text = src.substr(start, pos - start);
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos;
      while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) advance(1);
      t.kind = Tok::Int;
      t.text = src.substr(start, pos - start);
      return t;
    }
    // multi-char symbols first
    static const char* two[] = {":=", "==>", "==", "!=", "<=", "<<", ">>", "&&", "||"};
    for (const char* s : two) {
      size_t n = std::strlen(s);
      if (src.compare(pos, n, s) == 0) {
        t.kind = Tok::Sym;
        t.text = s;
        advance(n);
        return t;
      }
    }
    t.kind = Tok::Sym;
    t.text = std::string(1, c);
    advance(1);
    return t;
  }
};

struct Parser {
  std::vector<Token> toks;
  size_t idx = 0;
  std::vector<Diagnostic>& diags;
  bool failed = false;
  int next_tag = 0;
  int next_loop = 0;

  Parser(const std::string& src, std::vector<Diagnostic>& d) : diags(d) {
    Lexer lx(src, d);
    for (;;) {
      Token t = lx.next();
      bool end = t.kind == Tok::End;
      toks.push_back(std::move(t));
      if (end) break;
    }
  }

  const Token& cur() const { return toks[idx]; }
  const Token& peek(size_t n = 1) const { return toks[std::min(idx + n, toks.size() - 1)]; }
  void bump() { if (idx + 1 < toks.size()) ++idx; }

  SourceSpan span() const { return {cur().line, cur().col}; }

  void error(const std::string& msg) {
    if (!failed) diags.push_back({msg, span(), ""});
    failed = true;
  }

  bool at_ident(const char* kw) const {
    return cur().kind == Tok::Ident && cur().text == kw;
  }
  bool at_sym(const char* s) const { return cur().kind == Tok::Sym && cur().text == s; }

  bool eat_ident(const char* kw) {
    if (at_ident(kw)) { bump(); return true; }
    return false;
  }
  bool eat_sym(const char* s) {
    if (at_sym(s)) { bump(); return true; }
    return false;
  }
  void expect_sym(const char* s) {
    if (!eat_sym(s)) error(std::string("expected '") + s + "', got '" + cur().text + "'");
  }
  std::string expect_name(const char* what) {
    if (cur().kind != Tok::Ident) {
      error(std::string("expected ") + what + ", got '" + cur().text + "'");
      return "";
    }
    std::string n = cur().text;
    bump();
    return n;
  }
  uint32_t expect_int(const char* what) {
    if (cur().kind != Tok::Int) {
      error(std::string("expected ") + what + ", got '" + cur().text + "'");
      return 0;
    }
    unsigned long v = 0;
    try {
      v = std::stoul(cur().text);
    } catch (...) {
      error("integer literal out of range");
    }
    if (v > 0xFFFFFFFFul) error("integer literal out of range");
    bump();
    return static_cast<uint32_t>(v);
  }

  static bool is_ghost_fn(const std::string& s, GhostKind* k) {
    if (s == "write_has_occurred") { *k = GhostKind::WriteHasOccurred; return true; }
    if (s == "write_offset") { *k = GhostKind::WriteOffset; return true; }
    if (s == "read_has_occurred") { *k = GhostKind::ReadHasOccurred; return true; }
    if (s == "read_offset") { *k = GhostKind::ReadOffset; return true; }
    return false;
  }

  // precedence climbing; returns binding power of current binary operator
  static int binop_prec(const std::string& s) {
    if (s == "==>") return 1;
    if (s == "||") return 2;
    if (s == "&&") return 3;
    if (s == "|") return 4;
    if (s == "^") return 5;
    if (s == "&") return 6;
    if (s == "==" || s == "!=") return 7;
    if (s == "<" || s == "<=") return 8;
    if (s == "<<" || s == ">>") return 9;
    if (s == "+" || s == "-") return 10;
    if (s == "*" || s == "/" || s == "%") return 11;
    return 0;
  }

  static Op binop_op(const std::string& s) {
    if (s == "==>") return Op::Implies;
    if (s == "||") return Op::Or;
    if (s == "&&") return Op::And;
    if (s == "|") return Op::BitOr;
    if (s == "^") return Op::BitXor;
    if (s == "&") return Op::BitAnd;
    if (s == "==") return Op::Eq;
    if (s == "!=") return Op::Ne;
    if (s == "<") return Op::ULt;
    if (s == "<=") return Op::ULe;
    if (s == "<<") return Op::Shl;
    if (s == ">>") return Op::LShr;
    if (s == "+") return Op::Add;
    if (s == "-") return Op::Sub;
    if (s == "*") return Op::Mul;
    if (s == "/") return Op::UDiv;
    return Op::URem;  // "%"
  }

  ExprPtr parse_primary() {
    if (failed) return bv(0);
    if (cur().kind == Tok::Int) {
      uint32_t v = expect_int("integer");
      return bv(v);
    }
    if (eat_sym("(")) {
      ExprPtr e = parse_expr();
      expect_sym(")");
      return e;
    }
    if (eat_sym("!")) {
      return lnot(parse_primary());
    }
    if (cur().kind == Tok::Ident) {
      std::string name = cur().text;
      if (name == "true") { bump(); return boolean(true); }
      if (name == "false") { bump(); return boolean(false); }
      GhostKind gk;
      if (is_ghost_fn(name, &gk) && peek().kind == Tok::Sym && peek().text == "(") {
        bump();
        expect_sym("(");
        std::string arr = expect_name("array name");
        expect_sym(")");
        return ghost(gk, arr);
      }
      bump();
      if (at_sym("[")) {
        expect_sym("[");
        ExprPtr off = parse_expr();
        expect_sym("]");
        return array_read(name, off);
      }
      return var(name);
    }
    error("expected expression, got '" + cur().text + "'");
    return bv(0);
  }

  ExprPtr parse_bin(int min_prec) {
    ExprPtr lhs = parse_primary();
    for (;;) {
      if (failed || cur().kind != Tok::Sym) break;
      int prec = binop_prec(cur().text);
      if (prec == 0 || prec < min_prec) break;
      std::string opname = cur().text;
      Op op = binop_op(opname);
      bump();
      // ==> is right-associative, everything else left-associative
      int next_min = (opname == "==>") ? prec : prec + 1;
      ExprPtr rhs = parse_bin(next_min);
      lhs = binary(op, lhs, rhs);
    }
    return lhs;
  }

  ExprPtr parse_expr() { return parse_bin(1); }

  std::vector<Stmt> parse_block() {
    std::vector<Stmt> out;
    expect_sym("{");
    while (!failed && !at_sym("}")) {
      if (cur().kind == Tok::End) { error("unexpected end of input in block"); break; }
      out.push_back(parse_stmt());
    }
    expect_sym("}");
    return out;
  }

  Stmt parse_stmt() {
    Stmt st;
    st.span = span();
    if (at_ident("havoc")) {
      bump();
      st.kind = StmtKind::Havoc;
      for (;;) {
        GhostKind gk;
        std::string n = expect_name("variable");
        if (is_ghost_fn(n, &gk) && at_sym("(")) {
          expect_sym("(");
          std::string arr = expect_name("array name");
          expect_sym(")");
          n = ghost_name(gk, arr);
        }
        st.vars.push_back(n);
        if (!eat_sym(",")) break;
      }
      expect_sym(";");
      return st;
    }
    if (at_ident("assert")) {
      bump();
      st.kind = StmtKind::Assert;
      st.expr = parse_expr();
      st.tag = "a" + std::to_string(next_tag++);
      expect_sym(";");
      return st;
    }
    if (at_ident("assume")) {
      bump();
      st.kind = StmtKind::Assume;
      st.expr = parse_expr();
      expect_sym(";");
      return st;
    }
    if (at_ident("if")) {
      bump();
      st.kind = StmtKind::If;
      expect_sym("(");
      st.expr = parse_expr();
      expect_sym(")");
      st.body = parse_block();
      if (eat_ident("else")) {
        st.has_else = true;
        st.else_body = parse_block();
      }
      return st;
    }
    if (at_ident("while")) {
      bump();
      st.kind = StmtKind::While;
      st.loop_id = "L" + std::to_string(next_loop++);
      expect_sym("(");
      st.expr = parse_expr();
      expect_sym(")");
      while (at_ident("invariant") || at_ident("candidate")) {
        bool is_cand = at_ident("candidate");
        bump();
        ExprPtr e = parse_expr();
        expect_sym(";");
        if (is_cand)
          st.candidate_pragmas.push_back(e);
        else
          st.invariants.push_back({e, "user"});
      }
      st.body = parse_block();
      return st;
    }
    if (at_ident("log_write") || at_ident("log_read")) {
      bool wr = at_ident("log_write");
      bump();
      st.kind = wr ? StmtKind::LogWrite : StmtKind::LogRead;
      st.target = expect_name("array name");
      expect_sym("[");
      st.expr = parse_expr();
      expect_sym("]");
      expect_sym(";");
      return st;
    }
    // assignment
    if (cur().kind == Tok::Ident) {
      st.kind = StmtKind::Assign;
      st.target = expect_name("variable");
      expect_sym(":=");
      st.expr = parse_expr();
      expect_sym(";");
      return st;
    }
    error("expected statement, got '" + cur().text + "'");
    return st;
  }

  VarDecl parse_scalar_decl(bool is_param) {
    VarDecl d;
    d.span = span();
    d.is_param = is_param;
    bump();  // param/local
    d.name = expect_name("variable name");
    expect_sym(":");
    if (eat_ident("bv")) d.type = Type::Bv;
    else if (eat_ident("bool")) d.type = Type::Bool;
    else error("expected type 'bv' or 'bool'");
    if (eat_sym("[")) {
      if (!eat_ident("thread_param")) error("expected 'thread_param' in pragma");
      if (!eat_ident("dim")) error("expected 'dim' in thread_param pragma");
      expect_sym("=");
      std::string dim = expect_name("dimension (x, y or z)");
      if (dim == "x" || dim == "y" || dim == "z") d.thread_dim = dim[0];
      else error("thread_param dim must be x, y or z");
      if (!eat_ident("kind")) error("expected 'kind' in thread_param pragma");
      expect_sym("=");
      if (eat_ident("thread")) d.thread_kind = ThreadParamKind::Thread;
      else if (eat_ident("block")) d.thread_kind = ThreadParamKind::Block;
      else error("thread_param kind must be 'thread' or 'block'");
      expect_sym("]");
      if (!is_param) error("thread_param pragma is only valid on params");
    }
    expect_sym(";");
    return d;
  }

  std::optional<Program> parse_program() {
    Program p;
    if (!eat_ident("kernel")) { error("expected 'kernel'"); return std::nullopt; }
    p.name = expect_name("kernel name");
    if (!eat_ident("width")) error("expected 'width'");
    p.bit_width = expect_int("bit width");
    expect_sym("{");
    if (eat_ident("disable")) {
      for (;;) {
        std::string r = expect_name("rule name");
        if (!rule_from_name(r)) error("unknown rule '" + r + "' in disable clause");
        p.disabled_rules.push_back(r);
        if (!eat_sym(",")) break;
      }
      expect_sym(";");
    }
    for (;;) {
      if (at_ident("param") || at_ident("local")) {
        bool is_param = at_ident("param");
        VarDecl d = parse_scalar_decl(is_param);
        (is_param ? p.params : p.locals).push_back(d);
      } else if (at_ident("array")) {
        ArrayDecl a;
        a.span = span();
        bump();
        a.name = expect_name("array name");
        expect_sym(";");
        p.arrays.push_back(a);
      } else {
        break;
      }
      if (failed) return std::nullopt;
    }
    while (at_ident("requires")) {
      bump();
      p.preconditions.push_back(parse_expr());
      expect_sym(";");
      if (failed) return std::nullopt;
    }
    while (!failed && !at_sym("}")) {
      if (cur().kind == Tok::End) { error("unexpected end of input"); break; }
      p.body.push_back(parse_stmt());
    }
    expect_sym("}");
    if (failed) return std::nullopt;
    if (cur().kind != Tok::End) error("trailing input after program");
    if (failed) return std::nullopt;
    return p;
  }
};

}  // namespace detail

inline ParseResult parse(const std::string& text) {
  ParseResult r;
  detail::Parser ps(text, r.diagnostics);
  r.program = ps.parse_program();
  if (!r.diagnostics.empty()) r.program.reset();
  return r;
}

// Parses a single expression (used by tests and tools to build candidates).
inline ExprPtr parse_expression(const std::string& text, std::vector<Diagnostic>* diags = nullptr) {
  std::vector<Diagnostic> local;
  detail::Parser ps(text, diags ? *diags : local);
  ExprPtr e = ps.parse_expr();
  if (ps.cur().kind != detail::Tok::End) ps.error("trailing input after expression");
  if (ps.failed) return nullptr;
  return e;
}

// ---------------------------------------------------------------------------
// Pretty printing.

namespace detail {

inline int print_prec(Op op) {
  switch (op) {
    case Op::Implies: return 1;
    case Op::Or: return 2;
    case Op::And: return 3;
    case Op::BitOr: return 4;
    case Op::BitXor: return 5;
    case Op::BitAnd: return 6;
    case Op::Eq: case Op::Ne: return 7;
    case Op::ULt: case Op::ULe: return 8;
    case Op::Shl: case Op::LShr: return 9;
    case Op::Add: case Op::Sub: return 10;
    case Op::Mul: case Op::UDiv: case Op::URem: return 11;
    case Op::Not: return 12;
  }
  return 12;
}

inline const char* op_text(Op op) {
  switch (op) {
    case Op::Implies: return "==>";
    case Op::Or: return "||";
    case Op::And: return "&&";
    case Op::BitOr: return "|";
    case Op::BitXor: return "^";
    case Op::BitAnd: return "&";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::ULt: return "<";
    case Op::ULe: return "<=";
    case Op::Shl: return "<<";
    case Op::LShr: return ">>";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::UDiv: return "/";
    case Op::URem: return "%";
    case Op::Not: return "!";
  }
  return "?";
}

inline void print_expr(std::ostream& os, const ExprPtr& e, int parent_prec, bool right_side) {
  switch (e->kind) {
    case ExprKind::BvLit: os << e->literal; return;
    case ExprKind::BoolLit: os << (e->literal ? "true" : "false"); return;
    case ExprKind::Var: os << e->name; return;
    case ExprKind::Ghost: os << ghost_kind_name(e->ghost) << "(" << e->name << ")"; return;
    case ExprKind::ArrayRead:
      os << e->name << "[";
      print_expr(os, e->a, 0, false);
      os << "]";
      return;
    case ExprKind::Unary:
      os << "!";
      if (e->a->kind == ExprKind::Binary) {
        os << "(";
        print_expr(os, e->a, 0, false);
        os << ")";
      } else {
        print_expr(os, e->a, print_prec(Op::Not), false);
      }
      return;
    case ExprKind::Binary: {
      int prec = print_prec(e->op);
      bool right_assoc = e->op == Op::Implies;
      bool need = prec < parent_prec || (prec == parent_prec && right_side != right_assoc);
      if (need) os << "(";
      print_expr(os, e->a, right_assoc ? prec + 1 : prec, false);
      os << " " << op_text(e->op) << " ";
      print_expr(os, e->b, right_assoc ? prec : prec + 1, true);
      if (need) os << ")";
      return;
    }
  }
}

inline void print_stmts(std::ostream& os, const std::vector<Stmt>& stmts, int indent);

inline void print_indent(std::ostream& os, int n) {
  for (int i = 0; i < n; ++i) os << "  ";
}

inline void print_stmt(std::ostream& os, const Stmt& st, int indent) {
  print_indent(os, indent);
  switch (st.kind) {
    case StmtKind::Assign:
      os << st.target << " := ";
      print_expr(os, st.expr, 0, false);
      os << ";\n";
      return;
    case StmtKind::Havoc: {
      os << "havoc ";
      for (size_t i = 0; i < st.vars.size(); ++i) {
        if (i) os << ", ";
        os << st.vars[i];
      }
      os << ";\n";
      return;
    }
    case StmtKind::Assert:
      os << "assert ";
      print_expr(os, st.expr, 0, false);
      os << ";\n";
      return;
    case StmtKind::Assume:
      os << "assume ";
      print_expr(os, st.expr, 0, false);
      os << ";\n";
      return;
    case StmtKind::If:
      os << "if (";
      print_expr(os, st.expr, 0, false);
      os << ") {\n";
      print_stmts(os, st.body, indent + 1);
      print_indent(os, indent);
      os << "}";
      if (st.has_else) {
        os << " else {\n";
        print_stmts(os, st.else_body, indent + 1);
        print_indent(os, indent);
        os << "}";
      }
      os << "\n";
      return;
    case StmtKind::While:
      os << "while (";
      print_expr(os, st.expr, 0, false);
      os << ")\n";
      for (auto& inv : st.invariants) {
        print_indent(os, indent + 1);
        os << "invariant ";
        print_expr(os, inv.expr, 0, false);
        os << ";\n";
      }
      for (auto& c : st.candidate_pragmas) {
        print_indent(os, indent + 1);
        os << "candidate ";
        print_expr(os, c, 0, false);
        os << ";\n";
      }
      print_indent(os, indent);
      os << "{\n";
      print_stmts(os, st.body, indent + 1);
      print_indent(os, indent);
      os << "}\n";
      return;
    case StmtKind::LogWrite:
    case StmtKind::LogRead:
      os << (st.kind == StmtKind::LogWrite ? "log_write " : "log_read ") << st.target << "[";
      print_expr(os, st.expr, 0, false);
      os << "];\n";
      return;
  }
}

inline void print_stmts(std::ostream& os, const std::vector<Stmt>& stmts, int indent) {
  for (auto& st : stmts) print_stmt(os, st, indent);
}

}  // namespace detail

inline std::string pretty_print_expr(const ExprPtr& e) {
  std::ostringstream os;
  detail::print_expr(os, e, 0, false);
  return os.str();
}

inline std::string pretty_print(const Program& p) {
  std::ostringstream os;
  os << "kernel " << p.name << " width " << p.bit_width << " {\n";
  if (!p.disabled_rules.empty()) {
    os << "  disable ";
    for (size_t i = 0; i < p.disabled_rules.size(); ++i) {
      if (i) os << ", ";
      os << p.disabled_rules[i];
    }
    os << ";\n";
  }
  auto print_decl = [&](const VarDecl& d) {
    os << "  " << (d.is_param ? "param " : "local ") << d.name << " : "
       << (d.type == Type::Bv ? "bv" : "bool");
    if (d.thread_kind != ThreadParamKind::None) {
      os << " [thread_param dim=" << d.thread_dim << " kind="
         << (d.thread_kind == ThreadParamKind::Thread ? "thread" : "block") << "]";
    }
    os << ";\n";
  };
  for (auto& d : p.params) print_decl(d);
  for (auto& d : p.locals) print_decl(d);
  for (auto& a : p.arrays) os << "  array " << a.name << ";\n";
  for (auto& pre : p.preconditions) {
    os << "  requires ";
    detail::print_expr(os, pre, 0, false);
    os << ";\n";
  }
  detail::print_stmts(os, p.body, 1);
  os << "}\n";
  return os.str();
}

}  // namespace mvl
