#pragma once

// Concrete syntax: lexer, raw (name-based) abstract syntax, and the
// recursive-descent parser for `.blf` source files and proof scripts.
// The grammar is documented in docs/format.md.

#include <cctype>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blf/ast.hpp"

namespace blf {

// ---------------------------------------------------------------- tokens

enum class Tok {
  Ident, Colon, Semi, Bar, Equal, Arrow, Turnstile, LParen, RParen,
  LBrack, RBrack, LBrace, RBrace, Comma, Dot, Backslash, FatArrow,
  Slash, Question, End
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Pos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string src) : src_(std::move(src)) { next(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    next();
    return t;
  }

 private:
  void advance_char() {
    if (i_ < src_.size()) {
      if (src_[i_] == '\n') {
        pos_.line++;
        pos_.col = 1;
      } else {
        pos_.col++;
      }
      i_++;
    }
  }
  bool starts(const char* s) const {
    return src_.compare(i_, std::string(s).size(), s) == 0;
  }
  void next() {
    // skip whitespace and % comments
    for (;;) {
      while (i_ < src_.size() && std::isspace((unsigned char)src_[i_])) advance_char();
      if (i_ < src_.size() && src_[i_] == '%') {
        while (i_ < src_.size() && src_[i_] != '\n') advance_char();
        continue;
      }
      break;
    }
    tok_.pos = pos_;
    if (i_ >= src_.size()) {
      tok_.kind = Tok::End;
      tok_.text = "<eof>";
      return;
    }
    // multi-char / unicode tokens first
    struct Sym { const char* s; Tok k; };
    static const Sym syms[] = {
        {"->", Tok::Arrow},   {"→", Tok::Arrow},     // →
        {"|-", Tok::Turnstile}, {"⊢", Tok::Turnstile},  // ⊢
        {"=>", Tok::FatArrow},
    };
    for (auto& s : syms) {
      if (starts(s.s)) {
        tok_.kind = s.k;
        tok_.text = s.s;
        for (size_t n = std::string(s.s).size(); n; n--) advance_char();
        return;
      }
    }
    char c = src_[i_];
    auto one = [&](Tok k) {
      tok_.kind = k;
      tok_.text = std::string(1, c);
      advance_char();
    };
    switch (c) {
      case ':': one(Tok::Colon); return;
      case ';': one(Tok::Semi); return;
      case '|': one(Tok::Bar); return;
      case '=': one(Tok::Equal); return;
      case '(': one(Tok::LParen); return;
      case ')': one(Tok::RParen); return;
      case '[': one(Tok::LBrack); return;
      case ']': one(Tok::RBrack); return;
      case '{': one(Tok::LBrace); return;
      case '}': one(Tok::RBrace); return;
      case ',': one(Tok::Comma); return;
      case '.': one(Tok::Dot); return;
      case '\\': one(Tok::Backslash); return;
      case '/': one(Tok::Slash); return;
      case '?': one(Tok::Question); return;
      default: break;
    }
    if (std::isalnum((unsigned char)c) || c == '_') {
      std::string id;
      while (i_ < src_.size()) {
        char d = src_[i_];
        if (std::isalnum((unsigned char)d) || d == '_' || d == '/' || d == '\'') {
          // '/' continues an identifier only when followed by a letter
          // (val/c, halts/m); a lone '/' is the totality delimiter.
          if (d == '/' && !(i_ + 1 < src_.size() &&
                            (std::isalnum((unsigned char)src_[i_ + 1]) ||
                             src_[i_ + 1] == '_')))
            break;
          id += d;
          advance_char();
        } else {
          break;
        }
      }
      tok_.kind = Tok::Ident;
      tok_.text = id;
      return;
    }
    throw Diag(pos_, std::string("unexpected character '") + c + "'");
  }

  std::string src_;
  size_t i_ = 0;
  Pos pos_;
  Token tok_;
};

// ---------------------------------------------------------------- raw AST

struct RawNode;
using RawPtr = std::shared_ptr<RawNode>;

struct RawCtxEntry {
  std::string name;
  RawPtr type;  // null in hat contexts
};
struct RawCtx {
  std::optional<std::string> var;
  std::vector<RawCtxEntry> entries;
};

// Patterns for let/case.
struct RawPattern {
  enum Kind { BoxPat, CompPat } kind = BoxPat;
  RawCtx cx;           // BoxPat
  RawPtr body;         // BoxPat: LF pattern expression (or single name = unbox)
  std::string ctor;    // CompPat
  std::vector<std::string> args;  // CompPat
  RawPtr ascription;   // optional
  Pos pos;
};

struct RawBranch {
  RawPattern pat;
  RawPtr body;
};

struct RawNode {
  enum Kind {
    Name, App, Arrow, Binder, Lam, Box,
    Fn, MLam, Let, Case, Impossible, Hole
  } kind = Name;
  Pos pos;
  std::string name;            // Name / binder name / Fn / MLam / Hole
  std::vector<RawPtr> parts;   // App
  RawPtr a, b;                 // Arrow(a,b), Binder(type=a, body=b), Lam(body=a),
                               // Fn/MLam(body=a), Let(scrut=a, body=b),
                               // Case(scrut=a), Impossible(a)
  RawCtx cx;                   // Box
  RawPattern pat;              // Let
  std::vector<RawBranch> branches;  // Case
};

inline RawPtr mk_raw(RawNode::Kind k, Pos p) {
  auto n = std::make_shared<RawNode>();
  n->kind = k;
  n->pos = p;
  return n;
}

struct RawScript {
  std::string theorem;
  RawPtr type;
  std::optional<int> totality;
  std::vector<std::pair<std::string, RawPtr>> delta;  // name : (ctx |- A)
  std::vector<std::pair<std::string, RawPtr>> gamma;  // name : tau
  RawPtr solve;
};

struct RawDecl {
  enum Kind {
    LFFamilyD, CompInductive, CompStratified, TheoremD, SchemaD, ProofD
  } kind = LFFamilyD;
  Pos pos;
  std::string name;
  RawPtr type;  // family kind / comp kind / theorem statement
  std::vector<std::pair<std::string, RawPtr>> ctors;  // name : type
  std::optional<int> totality;
  RawPtr body;          // rec definition body
  RawScript script;     // ProofD
  std::string schema;   // SchemaD, stored verbatim-ish
};

// ---------------------------------------------------------------- parser

class Parser {
 public:
  explicit Parser(std::string src) : lx_(std::move(src)) {}

  std::vector<RawDecl> parse_file() {
    std::vector<RawDecl> out;
    while (lx_.peek().kind != Tok::End) out.push_back(parse_decl());
    return out;
  }

  // A single theorem statement (used by tests).
  RawPtr parse_type_expr() {
    RawPtr t = parse_expr();
    return t;
  }

  RawPtr parse_expr() {
    const Token& t = lx_.peek();
    if (t.kind == Tok::LBrace) return parse_binder();
    return parse_arrow();
  }

  // Computation expressions (rec bodies, solve bodies).
  RawPtr parse_cexpr() {
    const Token& t = lx_.peek();
    if (t.kind == Tok::Ident && t.text == "fn") return parse_fnlike(RawNode::Fn);
    if (t.kind == Tok::Ident && t.text == "mlam") return parse_fnlike(RawNode::MLam);
    if (t.kind == Tok::Ident && t.text == "let") return parse_let();
    if (t.kind == Tok::Ident && t.text == "case") return parse_case();
    if (t.kind == Tok::Ident && t.text == "impossible") {
      Pos p = lx_.take().pos;
      auto n = mk_raw(RawNode::Impossible, p);
      n->a = parse_capp_atom();
      return n;
    }
    return parse_capp();
  }

  RawScript parse_script_body(const std::string& name, RawPtr type) {
    RawScript s;
    s.theorem = name;
    s.type = type;
    s.totality = parse_totality_opt();
    expect_kw("intros");
    expect(Tok::LBrace);
    // meta declarations up to '|'
    if (lx_.peek().kind != Tok::Bar) {
      for (;;) {
        std::string n = expect_ident();
        expect(Tok::Colon);
        s.delta.emplace_back(n, parse_atomic_expr());
        if (lx_.peek().kind == Tok::Comma) {
          lx_.take();
          continue;
        }
        break;
      }
    }
    expect(Tok::Bar);
    if (lx_.peek().kind != Tok::Semi) {
      for (;;) {
        std::string n = expect_ident();
        expect(Tok::Colon);
        s.gamma.emplace_back(n, parse_expr());
        if (lx_.peek().kind == Tok::Comma) {
          lx_.take();
          continue;
        }
        break;
      }
    }
    expect(Tok::Semi);
    expect_kw("solve");
    s.solve = parse_cexpr();
    expect(Tok::RBrace);
    return s;
  }

 private:
  Token expect(Tok k) {
    if (lx_.peek().kind != k) err_expected(tok_name(k));
    return lx_.take();
  }
  std::string expect_ident() {
    if (lx_.peek().kind != Tok::Ident) err_expected("identifier");
    return lx_.take().text;
  }
  void expect_kw(const std::string& kw) {
    if (lx_.peek().kind != Tok::Ident || lx_.peek().text != kw)
      err_expected("'" + kw + "'");
    lx_.take();
  }
  [[noreturn]] void err_expected(const std::string& what) {
    throw Diag(lx_.peek().pos,
               "expected " + what + ", found '" + lx_.peek().text + "'");
  }
  static const char* tok_name(Tok k) {
    switch (k) {
      case Tok::Colon: return "':'";
      case Tok::Semi: return "';'";
      case Tok::Bar: return "'|'";
      case Tok::Equal: return "'='";
      case Tok::Arrow: return "'->'";
      case Tok::Turnstile: return "'|-'";
      case Tok::LParen: return "'('";
      case Tok::RParen: return "')'";
      case Tok::LBrack: return "'['";
      case Tok::RBrack: return "']'";
      case Tok::LBrace: return "'{'";
      case Tok::RBrace: return "'}'";
      case Tok::Comma: return "','";
      case Tok::Dot: return "'.'";
      case Tok::FatArrow: return "'=>'";
      default: return "token";
    }
  }

  std::optional<int> parse_totality_opt() {
    if (lx_.peek().kind != Tok::Slash) return std::nullopt;
    lx_.take();
    expect_kw("total");
    std::string n = expect_ident();
    expect(Tok::Slash);
    try {
      return std::stoi(n);
    } catch (...) {
      throw Diag(lx_.peek().pos, "totality index must be a number");
    }
  }

  RawDecl parse_decl() {
    Token t = lx_.peek();
    if (t.kind != Tok::Ident) err_expected("declaration keyword");
    RawDecl d;
    d.pos = t.pos;
    if (t.text == "LF") {
      lx_.take();
      d.kind = RawDecl::LFFamilyD;
      d.name = expect_ident();
      expect(Tok::Colon);
      d.type = parse_expr();
      if (lx_.peek().kind == Tok::Equal) {
        lx_.take();
        parse_ctor_list(d);
      }
      expect(Tok::Semi);
      return d;
    }
    if (t.text == "inductive" || t.text == "stratified") {
      lx_.take();
      d.kind = t.text == "inductive" ? RawDecl::CompInductive
                                     : RawDecl::CompStratified;
      d.name = expect_ident();
      expect(Tok::Colon);
      d.type = parse_expr();
      expect(Tok::Equal);
      parse_ctor_list(d);
      expect(Tok::Semi);
      return d;
    }
    if (t.text == "rec" || t.text == "theorem") {
      lx_.take();
      d.kind = RawDecl::TheoremD;
      d.name = expect_ident();
      expect(Tok::Colon);
      d.type = parse_expr();
      d.totality = parse_totality_opt();
      if (lx_.peek().kind == Tok::Equal) {
        lx_.take();
        d.body = parse_cexpr();
      }
      expect(Tok::Semi);
      return d;
    }
    if (t.text == "schema") {
      lx_.take();
      d.kind = RawDecl::SchemaD;
      d.name = expect_ident();
      expect(Tok::Equal);
      // stored uninterpreted up to ';'
      std::string acc;
      while (lx_.peek().kind != Tok::Semi && lx_.peek().kind != Tok::End) {
        acc += lx_.take().text;
        acc += ' ';
      }
      d.schema = acc;
      expect(Tok::Semi);
      return d;
    }
    if (t.text == "proof") {
      lx_.take();
      d.kind = RawDecl::ProofD;
      d.name = expect_ident();
      expect(Tok::Colon);
      d.type = parse_expr();
      expect(Tok::Equal);
      d.script = parse_script_body(d.name, d.type);
      expect(Tok::Semi);
      return d;
    }
    throw Diag(t.pos, "unknown top-level form '" + t.text + "'");
  }

  void parse_ctor_list(RawDecl& d) {
    while (lx_.peek().kind == Tok::Bar) {
      lx_.take();
      std::string n = expect_ident();
      expect(Tok::Colon);
      d.ctors.emplace_back(n, parse_expr());
    }
  }

  // --- type/term expressions ---

  RawPtr parse_binder() {
    Pos p = expect(Tok::LBrace).pos;
    std::string n = expect_ident();
    expect(Tok::Colon);
    RawPtr ty = parse_expr();
    expect(Tok::RBrace);
    auto node = mk_raw(RawNode::Binder, p);
    node->name = n;
    node->a = ty;
    node->b = parse_expr();
    return node;
  }

  RawPtr parse_arrow() {
    RawPtr lhs = parse_app();
    if (lx_.peek().kind == Tok::Arrow) {
      Pos p = lx_.take().pos;
      auto node = mk_raw(RawNode::Arrow, p);
      node->a = lhs;
      node->b = parse_expr();  // right-associative; binders allowed after ->
      return node;
    }
    return lhs;
  }

  RawPtr parse_app() {
    Pos p = lx_.peek().pos;
    std::vector<RawPtr> parts;
    parts.push_back(parse_atomic_expr());
    while (atom_starts()) parts.push_back(parse_atomic_expr());
    if (parts.size() == 1) return parts[0];
    auto node = mk_raw(RawNode::App, p);
    node->parts = std::move(parts);
    return node;
  }

  bool atom_starts() {
    switch (lx_.peek().kind) {
      case Tok::Ident: {
        const std::string& s = lx_.peek().text;
        return s != "ctype" ? true : true;  // ctype is an ordinary atom name
      }
      case Tok::LParen:
      case Tok::LBrack:
      case Tok::LBrace:
      case Tok::Backslash:
        return true;
      default:
        return false;
    }
  }

  RawPtr parse_atomic_expr() {
    Token t = lx_.peek();
    switch (t.kind) {
      case Tok::Ident: {
        lx_.take();
        auto n = mk_raw(RawNode::Name, t.pos);
        n->name = t.text;
        return n;
      }
      case Tok::LParen: {
        lx_.take();
        // Either a parenthesized expression or a boxed form ( ctx |- A )
        // used in script meta declarations.
        RawPtr inner = parse_maybe_boxed_paren(t.pos);
        return inner;
      }
      case Tok::LBrack: {
        lx_.take();
        auto n = mk_raw(RawNode::Box, t.pos);
        n->cx = parse_ctx();
        expect(Tok::Turnstile);
        n->a = parse_expr();
        expect(Tok::RBrack);
        return n;
      }
      case Tok::LBrace:
        return parse_binder();
      case Tok::Backslash: {
        lx_.take();
        auto n = mk_raw(RawNode::Lam, t.pos);
        n->name = expect_ident();
        expect(Tok::Dot);
        n->a = parse_expr();
        return n;
      }
      default:
        err_expected("expression");
    }
  }

  // After '(' : either ( |- A ) / ( x:T |- A ) boxes or a grouped expr.
  RawPtr parse_maybe_boxed_paren(Pos p) {
    if (lx_.peek().kind == Tok::Turnstile) {
      auto n = mk_raw(RawNode::Box, p);
      lx_.take();
      n->a = parse_expr();
      expect(Tok::RParen);
      return n;
    }
    RawPtr e = parse_expr();
    if (lx_.peek().kind == Tok::Turnstile) {
      // ( x ... |- A ): reinterpret e as a context (names with types not
      // supported in this position; scripts only print ( |- A ) or (g |- A))
      auto n = mk_raw(RawNode::Box, p);
      if (e->kind == RawNode::Name) {
        n->cx.var = e->name;
      } else {
        throw Diag(p, "malformed boxed type");
      }
      lx_.take();
      n->a = parse_expr();
      expect(Tok::RParen);
      return n;
    }
    expect(Tok::RParen);
    return e;
  }

  RawCtx parse_ctx() {
    RawCtx cx;
    if (lx_.peek().kind == Tok::Turnstile) return cx;  // empty
    for (;;) {
      std::string n = expect_ident();
      if (lx_.peek().kind == Tok::Colon) {
        lx_.take();
        RawCtxEntry e;
        e.name = n;
        e.type = parse_app();
        cx.entries.push_back(e);
      } else if (cx.entries.empty() && !cx.var) {
        // could be a context variable or a hat variable; decide on comma
        RawCtxEntry e;
        e.name = n;
        cx.entries.push_back(e);
      } else {
        RawCtxEntry e;
        e.name = n;
        cx.entries.push_back(e);
      }
      if (lx_.peek().kind == Tok::Comma) {
        lx_.take();
        continue;
      }
      break;
    }
    return cx;
  }

  // --- computation expressions ---

  RawPtr parse_fnlike(RawNode::Kind k) {
    Pos p = lx_.take().pos;  // fn / mlam
    std::vector<std::string> names;
    names.push_back(expect_ident());
    while (lx_.peek().kind == Tok::Comma) {
      lx_.take();
      names.push_back(expect_ident());
    }
    expect(Tok::FatArrow);
    RawPtr body = parse_cexpr();
    for (auto it = names.rbegin(); it != names.rend(); ++it) {
      auto n = mk_raw(k, p);
      n->name = *it;
      n->a = body;
      body = n;
    }
    return body;
  }

  RawPtr parse_let() {
    Pos p = lx_.take().pos;  // let
    auto n = mk_raw(RawNode::Let, p);
    n->pat = parse_pattern();
    expect(Tok::Equal);
    n->a = parse_cexpr();
    expect_kw("in");
    n->b = parse_cexpr();
    return n;
  }

  RawPtr parse_case() {
    Pos p = lx_.take().pos;  // case
    auto n = mk_raw(RawNode::Case, p);
    n->a = parse_capp_atom();
    expect_kw("of");
    while (lx_.peek().kind == Tok::Bar) {
      lx_.take();
      RawBranch br;
      br.pat = parse_pattern();
      expect(Tok::FatArrow);
      br.body = parse_cexpr();
      n->branches.push_back(br);
    }
    if (n->branches.empty()) err_expected("'|' branch");
    return n;
  }

  RawPattern parse_pattern() {
    RawPattern pat;
    pat.pos = lx_.peek().pos;
    if (lx_.peek().kind == Tok::LBrack) {
      lx_.take();
      pat.kind = RawPattern::BoxPat;
      pat.cx = parse_ctx();
      expect(Tok::Turnstile);
      pat.body = parse_app();
      if (lx_.peek().kind == Tok::Colon) {
        lx_.take();
        pat.ascription = parse_expr();
      }
      expect(Tok::RBrack);
      // outer ascription: let ([ |- pat] : [ |- A]) = ... is normalized by
      // the '(' case below
      return pat;
    }
    if (lx_.peek().kind == Tok::LParen) {
      lx_.take();
      if (lx_.peek().kind == Tok::LBrack) {
        // ([ |- pat] : [ |- A])
        pat = parse_pattern();
        if (lx_.peek().kind == Tok::Colon) {
          lx_.take();
          pat.ascription = parse_expr();
        }
        expect(Tok::RParen);
        return pat;
      }
      pat.kind = RawPattern::CompPat;
      pat.ctor = expect_ident();
      while (lx_.peek().kind == Tok::Ident) pat.args.push_back(lx_.take().text);
      if (lx_.peek().kind == Tok::Colon) {
        lx_.take();
        pat.ascription = parse_expr();
      }
      expect(Tok::RParen);
      return pat;
    }
    err_expected("pattern");
  }

  RawPtr parse_capp() {
    Pos p = lx_.peek().pos;
    std::vector<RawPtr> parts;
    parts.push_back(parse_capp_atom());
    while (capp_atom_starts()) parts.push_back(parse_capp_atom());
    if (parts.size() == 1) return parts[0];
    auto node = mk_raw(RawNode::App, p);
    node->parts = std::move(parts);
    return node;
  }

  bool capp_atom_starts() {
    switch (lx_.peek().kind) {
      case Tok::Ident: {
        const std::string& s = lx_.peek().text;
        return s != "in" && s != "of" && s != "fn" && s != "mlam" &&
               s != "let" && s != "case" && s != "solve" && s != "impossible";
      }
      case Tok::LParen:
      case Tok::LBrack:
      case Tok::Question:
        return true;
      default:
        return false;
    }
  }

  RawPtr parse_capp_atom() {
    Token t = lx_.peek();
    switch (t.kind) {
      case Tok::Ident: {
        if (t.text == "fn" || t.text == "mlam" || t.text == "let" ||
            t.text == "case" || t.text == "impossible")
          return parse_cexpr();
        lx_.take();
        auto n = mk_raw(RawNode::Name, t.pos);
        n->name = t.text;
        return n;
      }
      case Tok::LParen: {
        lx_.take();
        RawPtr e = parse_cexpr();
        expect(Tok::RParen);
        return e;
      }
      case Tok::LBrack: {
        lx_.take();
        auto n = mk_raw(RawNode::Box, t.pos);
        n->cx = parse_ctx();
        expect(Tok::Turnstile);
        n->a = parse_expr();
        expect(Tok::RBrack);
        return n;
      }
      case Tok::Question: {
        lx_.take();
        auto n = mk_raw(RawNode::Hole, t.pos);
        n->name = lx_.peek().kind == Tok::Ident ? lx_.take().text : "hole";
        return n;
      }
      default:
        err_expected("expression");
    }
  }

  Lexer lx_;
};

// Convenience entry points.
inline std::vector<RawDecl> parse_signature(const std::string& text) {
  Parser p(text);
  auto decls = p.parse_file();
  // duplicate names are rejected here; kinds are resolved in elaboration
  std::vector<std::string> seen;
  for (auto& d : decls) {
    for (auto& s : seen)
      if (s == d.name) throw Diag(d.pos, "duplicate declaration '" + d.name + "'");
    seen.push_back(d.name);
  }
  return decls;
}

inline RawPtr parse_theorem(const std::string& text) {
  Parser p(text);
  return p.parse_type_expr();
}

}  // namespace blf
