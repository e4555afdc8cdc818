#pragma once

// Core abstract syntax: contextual LF terms/types, the meta layer shared by
// both levels, computation-level types/expressions, signatures and proof
// scripts. Everything is immutable; sharing via shared_ptr.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace blf {

struct LFTerm;
struct LFType;
using TermPtr = std::shared_ptr<const LFTerm>;
using TypePtr = std::shared_ptr<const LFType>;

// Simultaneous LF substitution: optional leading weakening by a context
// variable, then one entry per concrete declaration of the domain context.
struct Subst {
  std::optional<std::string> wk;
  std::vector<TermPtr> entries;
  bool is_empty() const { return !wk && entries.empty(); }
};

struct Head {
  enum Kind { Const, BVar, MVar } kind = Const;
  std::string name;  // Const / MVar
  int index = -1;    // BVar, de Bruijn, 0 = innermost binder
  Subst sub;         // MVar delayed substitution
};

// Canonical terms: Lam(body) when lam_body is set, else Neutral(head, spine).
struct LFTerm {
  TermPtr lam_body;
  std::string binder_hint;  // printing only
  Head head;
  std::vector<TermPtr> spine;
  bool is_lam() const { return lam_body != nullptr; }
};

// Types: Atom(family, args) when pi is false, else Pi.  The codomain of a Pi
// is always scoped under one binder, whether or not the binder is dependent;
// `param` distinguishes Pi x^:A.B (dependent, solved by unification) from
// A -> B (proof obligation).
struct LFType {
  bool is_pi = false;
  std::string family;
  std::vector<TermPtr> args;
  bool param = false;
  TypePtr dom, cod;
  std::string binder_hint;
};

inline TermPtr mk_lam(TermPtr body, std::string hint = "x") {
  auto t = std::make_shared<LFTerm>();
  t->lam_body = std::move(body);
  t->binder_hint = std::move(hint);
  return t;
}
inline TermPtr mk_neutral(Head h, std::vector<TermPtr> spine = {}) {
  auto t = std::make_shared<LFTerm>();
  t->head = std::move(h);
  t->spine = std::move(spine);
  return t;
}
inline TermPtr mk_const(const std::string& c, std::vector<TermPtr> spine = {}) {
  Head h;
  h.kind = Head::Const;
  h.name = c;
  return mk_neutral(std::move(h), std::move(spine));
}
inline TermPtr mk_bvar(int i, std::vector<TermPtr> spine = {}) {
  Head h;
  h.kind = Head::BVar;
  h.index = i;
  return mk_neutral(std::move(h), std::move(spine));
}
inline TermPtr mk_mvar(const std::string& u, Subst s = {}) {
  Head h;
  h.kind = Head::MVar;
  h.name = u;
  h.sub = std::move(s);
  return mk_neutral(std::move(h));
}
inline TypePtr mk_atom(std::string family, std::vector<TermPtr> args = {}) {
  auto t = std::make_shared<LFType>();
  t->family = std::move(family);
  t->args = std::move(args);
  return t;
}
inline TypePtr mk_pi(bool param, TypePtr dom, TypePtr cod, std::string hint = "x") {
  auto t = std::make_shared<LFType>();
  t->is_pi = true;
  t->param = param;
  t->dom = std::move(dom);
  t->cod = std::move(cod);
  t->binder_hint = std::move(hint);
  return t;
}

// LF contexts. Declaration i's type may mention declarations 0..i-1 via
// de Bruijn indices (0 = declaration i-1).
struct CtxDecl {
  std::string name;
  TypePtr type;
  bool param = false;  // x^ assumptions are unusable by init
};
struct LFCtx {
  std::optional<std::string> var;  // context variable heading the context
  std::vector<CtxDecl> decls;
  bool is_empty() const { return !var && decls.empty(); }
};

// Meta layer.
struct MetaType {
  enum Kind { Box, Schema } kind = Box;
  LFCtx cx;      // Box: (cx |- head)
  TypePtr head;  // atomic
  std::string schema;
};
struct MetaTerm {
  enum Kind { Contextual, Ctx } kind = Contextual;
  LFCtx cx;  // binders of the contextual term
  TermPtr term;
  LFCtx ctxval;
};
struct MetaDecl {
  std::string name;
  MetaType type;
  // Universal entries are parameters of the current goal; non-universal ones
  // are search/elaboration holes open to instantiation.
  bool universal = true;
};
using MetaCtx = std::vector<MetaDecl>;
using MetaSubst = std::map<std::string, MetaTerm>;

inline MetaType mk_boxed(LFCtx cx, TypePtr head) {
  MetaType u;
  u.kind = MetaType::Box;
  u.cx = std::move(cx);
  u.head = std::move(head);
  return u;
}
inline MetaTerm mk_contextual(LFCtx cx, TermPtr t) {
  MetaTerm c;
  c.kind = MetaTerm::Contextual;
  c.cx = std::move(cx);
  c.term = std::move(t);
  return c;
}

// Computation-level types.
struct CompType;
using CTypePtr = std::shared_ptr<const CompType>;
struct CompType {
  enum Kind { Box, Arrow, PiBox, Atomic } kind = Box;
  LFCtx cx;      // Box
  TypePtr head;  // Box, atomic
  CTypePtr left, right;  // Arrow
  std::string name;      // PiBox binder / Atomic type name
  MetaType u;            // PiBox
  bool implicit = false; // PiBox inserted by elaboration
  CTypePtr body;         // PiBox
  std::vector<MetaTerm> args;  // Atomic
};

inline CTypePtr mk_ctbox(LFCtx cx, TypePtr head) {
  auto t = std::make_shared<CompType>();
  t->kind = CompType::Box;
  t->cx = std::move(cx);
  t->head = std::move(head);
  return t;
}
inline CTypePtr mk_ctarrow(CTypePtr a, CTypePtr b) {
  auto t = std::make_shared<CompType>();
  t->kind = CompType::Arrow;
  t->left = std::move(a);
  t->right = std::move(b);
  return t;
}
inline CTypePtr mk_ctpibox(std::string x, MetaType u, CTypePtr body, bool implicit = false) {
  auto t = std::make_shared<CompType>();
  t->kind = CompType::PiBox;
  t->name = std::move(x);
  t->u = std::move(u);
  t->body = std::move(body);
  t->implicit = implicit;
  return t;
}
inline CTypePtr mk_ctatomic(std::string name, std::vector<MetaTerm> args) {
  auto t = std::make_shared<CompType>();
  t->kind = CompType::Atomic;
  t->name = std::move(name);
  t->args = std::move(args);
  return t;
}

// Computation-level expressions (proof terms), extended with case forms and
// holes so emitted scripts can be represented and re-checked.
struct CompExpr;
using CExprPtr = std::shared_ptr<const CompExpr>;

// LF-level case branch: pattern is a constant applied to fresh meta-variables
// (pat_vars, in spine order, implicit args included).
struct MetaBranch {
  TermPtr pat;
  std::vector<std::pair<std::string, MetaType>> pat_vars;
  CExprPtr body;
};
// Computation-level case branch: constructor plus names for its explicit
// arguments (comp variables for arrow args, meta names for explicit PiBoxes).
struct CompBranch {
  std::string ctor;
  std::vector<std::string> args;
  CExprPtr body;
};

struct CompExpr {
  enum Kind {
    Var, ConstRef, BoxI, LetBox, Fn, App, MLam, MApp, CaseMeta, CaseComp, Hole
  } kind = Var;
  std::string name;  // Var / ConstRef / binders / Hole label
  LFCtx cx;          // BoxI
  TermPtr term;      // BoxI
  CExprPtr e1, e2;   // LetBox(e1=scrut, e2=body), Fn(e1), App(e1,e2), MLam(e1), MApp(e1)
  MetaTerm carg;     // MApp
  CExprPtr scrut;    // cases
  std::vector<MetaBranch> mbranches;
  std::vector<CompBranch> cbranches;
  bool is_let = false;          // case printed as a let-inversion
  CTypePtr ascription;          // optional, printing/inversion lets
};

inline CExprPtr mk_cvar(std::string y) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::Var;
  e->name = std::move(y);
  return e;
}
inline CExprPtr mk_cconst(std::string c) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::ConstRef;
  e->name = std::move(c);
  return e;
}
inline CExprPtr mk_cbox(LFCtx cx, TermPtr t) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::BoxI;
  e->cx = std::move(cx);
  e->term = std::move(t);
  return e;
}
inline CExprPtr mk_cletbox(std::string x, CExprPtr scrut, CExprPtr body) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::LetBox;
  e->name = std::move(x);
  e->e1 = std::move(scrut);
  e->e2 = std::move(body);
  return e;
}
inline CExprPtr mk_cfn(std::string y, CExprPtr body) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::Fn;
  e->name = std::move(y);
  e->e1 = std::move(body);
  return e;
}
inline CExprPtr mk_capp(CExprPtr f, CExprPtr a) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::App;
  e->e1 = std::move(f);
  e->e2 = std::move(a);
  return e;
}
inline CExprPtr mk_cmlam(std::string x, CExprPtr body) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::MLam;
  e->name = std::move(x);
  e->e1 = std::move(body);
  return e;
}
inline CExprPtr mk_cmapp(CExprPtr f, MetaTerm c) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::MApp;
  e->e1 = std::move(f);
  e->carg = std::move(c);
  return e;
}
inline CExprPtr mk_chole(std::string label) {
  auto e = std::make_shared<CompExpr>();
  e->kind = CompExpr::Hole;
  e->name = std::move(label);
  return e;
}

// Global signature.
struct LFFamily {
  std::string name;
  TypePtr kind;  // Pis ending in the pseudo-atom "type"
  int implicits = 0;
  std::vector<std::string> ctors;
};
struct LFConst {
  std::string name;
  std::string family;  // target family
  TypePtr type;
  int implicits = 0;
};
struct CompTypeDecl {
  std::string name;
  bool stratified = false;
  std::vector<std::pair<std::string, MetaType>> indices;
  std::vector<std::string> ctors;
};
struct CompConst {
  std::string name;
  std::string target;  // target computation type
  CTypePtr type;
  int implicits = 0;
};
struct TheoremDecl {
  std::string name;
  CTypePtr type;
  std::optional<int> totality;  // 1-based explicit argument index
  CExprPtr body;                // provided proof term, if any (rec defs)
};

struct Signature {
  std::vector<LFFamily> families;
  std::vector<LFConst> consts;
  std::vector<CompTypeDecl> ctypes;
  std::vector<CompConst> cconsts;
  std::vector<TheoremDecl> theorems;
  std::map<std::string, std::string> schemas;  // stored, never decomposed

  const LFFamily* family(const std::string& n) const {
    for (auto& f : families)
      if (f.name == n) return &f;
    return nullptr;
  }
  const LFConst* lf_const(const std::string& n) const {
    for (auto& c : consts)
      if (c.name == n) return &c;
    return nullptr;
  }
  const CompTypeDecl* ctype(const std::string& n) const {
    for (auto& c : ctypes)
      if (c.name == n) return &c;
    return nullptr;
  }
  const CompConst* comp_const(const std::string& n) const {
    for (auto& c : cconsts)
      if (c.name == n) return &c;
    return nullptr;
  }
  const TheoremDecl* theorem(const std::string& n) const {
    for (auto& t : theorems)
      if (t.name == n) return &t;
    return nullptr;
  }
  bool declared(const std::string& n) const {
    return family(n) || lf_const(n) || ctype(n) || comp_const(n) || theorem(n) ||
           schemas.count(n);
  }
};

// A checked/emitted proof script: the intros block plus the solve expression.
struct ProofScript {
  std::string theorem;
  CTypePtr type;
  std::optional<int> totality;
  MetaCtx delta;
  std::vector<std::pair<std::string, CTypePtr>> gamma;
  CExprPtr solve;
};

// Positions and diagnostics.
struct Pos {
  int line = 1, col = 1;
};
struct Diag : std::exception {
  Pos pos;
  std::string msg;
  Diag(Pos p, std::string m) : pos(p), msg(std::move(m)) {
    what_ = "line " + std::to_string(pos.line) + ":" + std::to_string(pos.col) +
            ": " + msg;
  }
  explicit Diag(std::string m) : msg(std::move(m)), what_(msg) {}
  const char* what() const noexcept override { return what_.c_str(); }
 private:
  std::string what_;
};

}  // namespace blf
