#pragma once

// Elaboration: raw, name-based syntax into the core representation.
//
// - resolves names (bound LF variables, meta-variables, signature constants)
// - inserts meta-variables for the implicit arguments of constants
// - infers types for free (capitalized) meta-variables from their first use,
//   lowering function-typed ones to contextual variables on the fly
// - promotes the meta-variables left unsolved at the end of a declaration to
//   implicit binders, sorted so every binder's type only mentions earlier ones
//
// Script bodies are elaborated structurally; implicit argument positions in
// their boxed terms are filled with fresh '?n' meta-variables that the proof
// checker later solves by unification.

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "blf/ast.hpp"
#include "blf/subst.hpp"
#include "blf/syntax.hpp"
#include "blf/unify.hpp"

namespace blf {

struct ElabResult {
  Signature sig;
  std::vector<ProofScript> scripts;
};

class Elaborator {
 public:
  ElabResult run(const std::vector<RawDecl>& decls) {
    for (auto& d : decls) {
      switch (d.kind) {
        case RawDecl::LFFamilyD: elab_family(d); break;
        case RawDecl::CompInductive:
        case RawDecl::CompStratified: elab_ctype_decl(d); break;
        case RawDecl::TheoremD: elab_theorem(d); break;
        case RawDecl::SchemaD: sig_.schemas[d.name] = d.schema; break;
        case RawDecl::ProofD: elab_proof(d); break;
      }
    }
    return {std::move(sig_), std::move(scripts_)};
  }

  const Signature& sig() const { return sig_; }

 private:
  Signature sig_;
  std::vector<ProofScript> scripts_;

  // per-declaration elaboration state
  MetaStore store_;
  MetaTypeEnv mtypes_;                 // every live meta-variable's type
  std::vector<std::string> order_;     // first-seen order of created mvars
  std::set<std::string> bound_meta_;   // explicitly bound (not promotable)
  bool script_mode_ = false;           // free capitalized names disallowed
  int ins_counter_ = 0;

  void reset_decl_state(bool script) {
    store_ = MetaStore();
    mtypes_.clear();
    order_.clear();
    bound_meta_.clear();
    script_mode_ = script;
    ins_counter_ = 0;
    ins_hint_.clear();
  }

  static bool capitalized(const std::string& n) {
    return !n.empty() && std::isupper((unsigned char)n[0]);
  }

  std::string fresh_meta(std::string hint) {
    if (hint.empty()) hint = "X";
    std::string n = hint;
    int c = 0;
    while (mtypes_.count(n) || sig_.declared(n)) n = hint + std::to_string(++c);
    return n;
  }

  void register_meta(const std::string& n, MetaType ty, bool bound) {
    mtypes_[n] = std::move(ty);
    order_.push_back(n);
    if (bound) bound_meta_.insert(n);
  }

  Unifier unifier() {
    return Unifier(sig_, store_, mtypes_,
                   [this](const std::string& u) { return !bound_meta_.count(u); });
  }
  MetaLookup look() const { return store_lookup(store_); }

  void must_unify_types(const LFCtx& cx, const TypePtr& a, const TypePtr& b,
                        Pos pos, const char* what) {
    if (unifier().type(cx, a, b) != UnifyResult::Solved)
      throw Diag(pos, std::string(what) + ": cannot match " +
                          Printer(&sig_).type(zonk_type(a, look()), names(cx)) +
                          " with " +
                          Printer(&sig_).type(zonk_type(b, look()), names(cx)));
  }

  static std::vector<std::string> names(const LFCtx& cx) {
    std::vector<std::string> v;
    for (auto& d : cx.decls) v.push_back(d.name);
    return v;
  }
  static int lookup_bvar(const LFCtx& cx, const std::string& n) {
    for (int i = (int)cx.decls.size() - 1; i >= 0; i--)
      if (cx.decls[i].name == n) return (int)cx.decls.size() - 1 - i;
    return -1;
  }

  // ------------------------------------------------------------- LF level

  // A type expression (kinds and declaration types).
  TypePtr elab_type(const LFCtx& cx, const RawPtr& r) {
    switch (r->kind) {
      case RawNode::Binder: {
        TypePtr dom = elab_type(cx, r->a);
        LFCtx cx2 = cx;
        cx2.decls.push_back(CtxDecl{r->name, dom, true});
        return mk_pi(true, dom, elab_type(cx2, r->b), r->name);
      }
      case RawNode::Arrow: {
        TypePtr dom = elab_type(cx, r->a);
        LFCtx cx2 = cx;
        cx2.decls.push_back(CtxDecl{"_", dom, false});
        return mk_pi(false, dom, elab_type(cx2, r->b), "_");
      }
      case RawNode::Name:
      case RawNode::App:
        return elab_atom(cx, r);
      default:
        throw Diag(r->pos, "expected an LF type");
    }
  }

  TypePtr elab_atom(const LFCtx& cx, const RawPtr& r) {
    std::string fam;
    std::vector<RawPtr> args;
    if (r->kind == RawNode::Name) {
      fam = r->name;
    } else if (r->kind == RawNode::App && r->parts[0]->kind == RawNode::Name) {
      fam = r->parts[0]->name;
      args.assign(r->parts.begin() + 1, r->parts.end());
    } else {
      throw Diag(r->pos, "expected an atomic LF type");
    }
    if (fam == "type") {
      if (!args.empty()) throw Diag(r->pos, "'type' takes no arguments");
      return mk_atom("type");
    }
    const LFFamily* f = sig_.family(fam);
    if (!f) throw Diag(r->pos, "undeclared type family '" + fam + "'");
    TypePtr k = f->kind;
    std::vector<TermPtr> spine;
    // implicit positions first
    for (int i = 0; i < f->implicits; i++) {
      if (!k->is_pi) break;
      TermPtr u = insert_implicit(cx, k->dom, k->binder_hint);
      spine.push_back(u);
      k = subst_top_type(k->cod, u);
    }
    for (auto& a : args) {
      if (!k->is_pi)
        throw Diag(a->pos, "too many arguments to family " + fam);
      TermPtr t = elab_check(cx, a, zonk_type(k->dom, look()));
      spine.push_back(t);
      k = subst_top_type(k->cod, t);
    }
    if (k->is_pi)
      throw Diag(r->pos, "family " + fam + " is not fully applied");
    return mk_atom(fam, std::move(spine));
  }

  // Fresh meta-variable standing for an implicit argument of type `dom`
  // (valid in cx). Contextual typing wants a closed domain; implicit argument
  // types in this fragment never mention local binders.
  TermPtr insert_implicit(const LFCtx& cx, const TypePtr& dom,
                          const std::string& hint) {
    TypePtr d = zonk_type(dom, look());
    std::string u = ins_name(hint);
    if (d->is_pi) {
      // function-typed implicit: lower to a contextual variable
      auto [ucx, core] = peel_pis(d);
      register_meta(u, mk_boxed(ucx, core), false);
      return eta_closure(u, (int)ucx.decls.size());
    }
    register_meta(u, mk_boxed(LFCtx{}, d), false);
    (void)cx;
    return mk_mvar(u);
  }

  // Insertion meta-variables get unwritable names so user identifiers can
  // never capture them; a display hint is kept for promotion time.
  std::map<std::string, std::string> ins_hint_;
  std::string ins_name(const std::string& hint) {
    if (script_mode_) return "?" + std::to_string(++ins_counter_);
    std::string n = "#" + std::to_string(++ins_counter_);
    ins_hint_[n] = hint.empty() ? "X" : hint;
    return n;
  }
  std::string pretty_hint(const std::string& u) const {
    auto it = ins_hint_.find(u);
    return it == ins_hint_.end() ? u : it->second;
  }

  // {x1:A1}...{xk:Ak} P  ->  context x1:A1,...,xk:Ak and head P.
  // Fails if the type mentions enclosing LF binders.
  std::pair<LFCtx, TypePtr> peel_pis(TypePtr a) const {
    LFCtx cx;
    while (a->is_pi) {
      cx.decls.push_back(CtxDecl{a->binder_hint.empty() ? "x" : a->binder_hint,
                                 a->dom, a->param});
      a = a->cod;
    }
    if (max_free_bvar(a, 0) >= (int)cx.decls.size() ||
        ctx_escapes(cx))
      throw Diag("implicit argument type mentions local variables");
    return {cx, a};
  }
  static bool ctx_escapes(const LFCtx& cx) {
    for (size_t i = 0; i < cx.decls.size(); i++)
      if (max_free_bvar(cx.decls[i].type, 0) >= (int)i) return true;
    return false;
  }
  static int max_free_bvar_t(const TermPtr& t, int depth) {
    if (t->is_lam()) return max_free_bvar_t(t->lam_body, depth + 1);
    int m = -1;
    if (t->head.kind == Head::BVar && t->head.index >= depth)
      m = t->head.index - depth;
    for (auto& e : t->head.sub.entries)
      m = std::max(m, max_free_bvar_t(e, depth));
    for (auto& a : t->spine) m = std::max(m, max_free_bvar_t(a, depth));
    return m;
  }
  static int max_free_bvar(const TypePtr& a, int depth) {
    if (a->is_pi)
      return std::max(max_free_bvar(a->dom, depth),
                      max_free_bvar(a->cod, depth + 1));
    int m = -1;
    for (auto& t : a->args) m = std::max(m, max_free_bvar_t(t, depth));
    return m;
  }

  // lam^k over u[(x_{k-1},...,x_0)]
  static TermPtr eta_closure(const std::string& u, int k) {
    Subst s;
    for (int i = k - 1; i >= 0; i--) s.entries.push_back(mk_bvar(i));
    TermPtr t = mk_mvar(u, std::move(s));
    for (int i = 0; i < k; i++) t = mk_lam(t);
    return t;
  }

  // M <= A with elaboration.
  TermPtr elab_check(const LFCtx& cx, const RawPtr& r, TypePtr expected) {
    expected = zonk_type(expected, look());
    if (r->kind == RawNode::Lam) {
      if (!expected->is_pi)
        throw Diag(r->pos, "lambda against non-function type");
      LFCtx cx2 = cx;
      cx2.decls.push_back(CtxDecl{r->name, expected->dom, expected->param});
      return mk_lam(elab_check(cx2, r->b ? r->b : r->a, expected->cod), r->name);
    }
    // '_' stands for a term to be inferred
    if (r->kind == RawNode::Name && r->name == "_")
      return eta_expand(insert_implicit(cx, expected, "w"), expected);
    // unknown capitalized head: free meta-variable
    std::string hd;
    std::vector<RawPtr> args;
    if (r->kind == RawNode::Name) {
      hd = r->name;
    } else if (r->kind == RawNode::App && r->parts[0]->kind == RawNode::Name) {
      hd = r->parts[0]->name;
      args.assign(r->parts.begin() + 1, r->parts.end());
    }
    bool known = hd.empty() || lookup_bvar(cx, hd) >= 0 || mtypes_.count(hd) ||
                 bound_meta_.count(hd) || sig_.lf_const(hd) || sig_.family(hd);
    if (!known) {
      if (!capitalized(hd) || script_mode_)
        throw Diag(r->pos, "undeclared identifier '" + hd + "'");
      return elab_free_meta(cx, r, hd, args, expected);
    }
    auto [t, ty] = elab_neutral(cx, r);
    must_unify_types(cx, ty, expected, r->pos, "argument type");
    return eta_expand(t, zonk_type(expected, look()));
  }

  static TermPtr push_var(const TermPtr& t) {
    TermPtr s = shift_term(t, 1, 0);
    std::vector<TermPtr> sp = s->spine;
    sp.push_back(mk_bvar(0));
    return mk_neutral(s->head, std::move(sp));
  }
  static TermPtr eta_expand(const TermPtr& t, const TypePtr& a) {
    if (!a->is_pi) return t;
    if (t->is_lam()) return mk_lam(eta_expand(t->lam_body, a->cod), t->binder_hint);
    return mk_lam(eta_expand(push_var(t), a->cod), a->binder_hint);
  }

  // First or repeated occurrence of a free meta-variable.
  TermPtr elab_free_meta(const LFCtx& cx, const RawPtr& r, const std::string& u,
                         const std::vector<RawPtr>& args, TypePtr expected) {
    if (mtypes_.count(u)) return elab_meta_occurrence(cx, r, u, args, expected);
    // new: infer its contextual type from this occurrence
    if (args.empty()) {
      if (!expected->is_pi) {
        if (max_free_bvar(expected, 0) >= 0)
          throw Diag(r->pos, "cannot infer a closed type for '" + u +
                                 "' from a type mentioning local variables");
        register_meta(u, mk_boxed(LFCtx{}, expected), false);
        return mk_mvar(u);
      }
      auto [ucx, core] = peel_pis(expected);
      register_meta(u, mk_boxed(ucx, core), false);
      return eta_closure(u, (int)ucx.decls.size());
    }
    // applied: arguments must be distinct bound variables (pattern)
    std::vector<int> img;
    LFCtx ucx;
    for (auto& a : args) {
      if (a->kind != RawNode::Name)
        throw Diag(a->pos, "argument of undetermined meta-variable '" + u +
                               "' must be a bound variable");
      int ix = lookup_bvar(cx, a->name);
      if (ix < 0)
        throw Diag(a->pos, "argument of undetermined meta-variable '" + u +
                               "' must be a bound variable");
      for (int seen : img)
        if (seen == ix)
          throw Diag(a->pos, "repeated variable in meta-variable arguments");
      img.push_back(ix);
      const CtxDecl& d = cx.decls[cx.decls.size() - 1 - ix];
      TypePtr dty =
          invert_type(shift_type(d.type, ix + 1, 0), img, (int)img.size() - 1,
                      r->pos, u);
      ucx.decls.push_back(CtxDecl{a->name, dty, d.param});
    }
    if (expected->is_pi)
      throw Diag(r->pos, "partially applied meta-variable '" + u + "'");
    TypePtr core =
        invert_type(expected, img, (int)img.size(), r->pos, u);
    register_meta(u, mk_boxed(ucx, core), false);
    Subst s;
    for (int ix : img) s.entries.push_back(mk_bvar(ix));
    return mk_mvar(u, std::move(s));
  }

  // Renames cx-level variables into the captured context: variable img[i]
  // becomes variable limit-1-i (limit = number of entries usable).
  TypePtr invert_type(const TypePtr& a, const std::vector<int>& img, int limit,
                      Pos pos, const std::string& u) const {
    if (a->is_pi)
      return mk_pi(a->param, invert_type(a->dom, img, limit, pos, u),
                   invert_type_shifted(a->cod, img, limit, 1, pos, u),
                   a->binder_hint);
    std::vector<TermPtr> as;
    for (auto& t : a->args) as.push_back(invert_term(t, img, limit, 0, pos, u));
    return mk_atom(a->family, std::move(as));
  }
  TypePtr invert_type_shifted(const TypePtr& a, const std::vector<int>& img,
                              int limit, int depth, Pos pos,
                              const std::string& u) const {
    if (a->is_pi)
      return mk_pi(a->param, invert_type_shifted(a->dom, img, limit, depth, pos, u),
                   invert_type_shifted(a->cod, img, limit, depth + 1, pos, u),
                   a->binder_hint);
    std::vector<TermPtr> as;
    for (auto& t : a->args)
      as.push_back(invert_term(t, img, limit, depth, pos, u));
    return mk_atom(a->family, std::move(as));
  }
  TermPtr invert_term(const TermPtr& t, const std::vector<int>& img, int limit,
                      int depth, Pos pos, const std::string& u) const {
    if (t->is_lam())
      return mk_lam(invert_term(t->lam_body, img, limit, depth + 1, pos, u),
                    t->binder_hint);
    Head h = t->head;
    if (h.kind == Head::BVar && h.index >= depth) {
      int src = h.index - depth;
      int tgt = -1;
      for (int i = 0; i < limit && i < (int)img.size(); i++)
        if (img[i] == src) tgt = limit - 1 - i;
      if (tgt < 0)
        throw Diag(pos, "type of meta-variable '" + u +
                            "' mentions a variable outside its arguments");
      h.index = tgt + depth;
    }
    if (h.kind == Head::MVar) {
      Subst ns;
      ns.wk = h.sub.wk;
      for (auto& e : h.sub.entries)
        ns.entries.push_back(invert_term(e, img, limit, depth, pos, u));
      h.sub = std::move(ns);
    }
    std::vector<TermPtr> sp;
    for (auto& a : t->spine)
      sp.push_back(invert_term(a, img, limit, depth, pos, u));
    return mk_neutral(std::move(h), std::move(sp));
  }

  // Occurrence of a meta-variable whose type is already known: arguments fill
  // its delayed substitution.
  TermPtr elab_meta_occurrence(const LFCtx& cx, const RawPtr& r,
                               const std::string& u,
                               const std::vector<RawPtr>& args,
                               TypePtr expected) {
    MetaType uty = zonk_metatype(mtypes_.at(u), look());
    if (uty.kind != MetaType::Box)
      throw Diag(r->pos, "'" + u + "' is a context variable");
    size_t arity = uty.cx.decls.size();
    if (args.size() > arity)
      throw Diag(r->pos, "too many arguments to meta-variable '" + u + "'");
    if (args.empty() && arity > 0) {
      // eta-expanded bare occurrence
      TermPtr t = eta_closure(u, (int)arity);
      TypePtr full = ctx_to_pis(uty.cx, uty.head);
      must_unify_types(cx, full, expected, r->pos, "meta-variable occurrence");
      return eta_expand(t, zonk_type(expected, look()));
    }
    if (args.size() < arity)
      throw Diag(r->pos, "partially applied meta-variable '" + u + "'");
    Subst s;
    for (size_t i = 0; i < args.size(); i++) {
      Subst prefix;
      prefix.entries = s.entries;
      TypePtr want = uty.cx.decls[i].type;
      want = prefix.entries.empty() && max_free_bvar(want, 0) < 0
                 ? want
                 : apply_subst_prefix(prefix, want, (int)i);
      s.entries.push_back(elab_check(cx, args[i], want));
    }
    TypePtr res = arity == 0 ? uty.head : apply_subst_type(s, uty.head);
    must_unify_types(cx, res, expected, r->pos, "meta-variable occurrence");
    if (arity == 0) return mk_mvar(u);
    return mk_mvar(u, std::move(s));
  }

  static TypePtr apply_subst_prefix(const Subst& prefix, const TypePtr& a,
                                    int scope) {
    // `a` is scoped over `scope` declarations; prefix supplies exactly those
    (void)scope;
    return apply_subst_type(prefix, a);
  }

  static TypePtr ctx_to_pis(const LFCtx& cx, TypePtr head) {
    for (int i = (int)cx.decls.size() - 1; i >= 0; i--)
      head = mk_pi(cx.decls[i].param, cx.decls[i].type, head,
                   cx.decls[i].name);
    return head;
  }

  // Neutral elaboration with type inference.
  std::pair<TermPtr, TypePtr> elab_neutral(const LFCtx& cx, const RawPtr& r) {
    std::string hd;
    std::vector<RawPtr> args;
    if (r->kind == RawNode::Name) {
      hd = r->name;
    } else if (r->kind == RawNode::App && r->parts[0]->kind == RawNode::Name) {
      hd = r->parts[0]->name;
      args.assign(r->parts.begin() + 1, r->parts.end());
    } else if (r->kind == RawNode::App &&
               r->parts[0]->kind == RawNode::Lam) {
      throw Diag(r->pos, "applied lambda is not in canonical form");
    } else {
      throw Diag(r->pos, "expected an LF term");
    }
    if (hd == "_") {
      // a term with no expected type here; only proof scripts may leave it
      // to the checker to reconstruct
      if (!script_mode_)
        throw Diag(r->pos, "'_' is only allowed where a type is expected");
      if (!args.empty()) throw Diag(r->pos, "'_' cannot be applied");
      std::string n = ins_name("w");
      register_meta(n, mk_boxed(cx, mk_atom("_")), false);
      TermPtr t = cx.decls.empty() ? mk_mvar(n) : mk_mvar(n, id_subst(cx));
      return {t, mk_atom("_")};
    }
    int bix = lookup_bvar(cx, hd);
    if (bix < 0 && !mtypes_.count(hd) && bound_meta_.count(hd)) {
      // pattern variable or mlam binder: its type is reconstructed by the
      // checker, so arguments are elaborated without expectations
      Subst s;
      for (auto& a : args) s.entries.push_back(elab_check(cx, a, mk_atom("_")));
      TermPtr t = args.empty() ? mk_mvar(hd) : mk_mvar(hd, std::move(s));
      return {t, mk_atom("_")};
    }
    Head h;
    TypePtr ty;
    if (bix >= 0) {
      h.kind = Head::BVar;
      h.index = bix;
      ty = shift_type(cx.decls[cx.decls.size() - 1 - bix].type, bix + 1, 0);
    } else if (mtypes_.count(hd)) {
      // meta-variable occurrence with explicit arguments in substitution
      // position; reuse the checked path by synthesizing its result type
      MetaType uty = zonk_metatype(mtypes_.at(hd), look());
      if (uty.kind != MetaType::Box)
        throw Diag(r->pos, "'" + hd + "' is a context variable");
      if (uty.cx.decls.size() != args.size()) {
        if (args.empty()) {
          TermPtr t = eta_closure(hd, (int)uty.cx.decls.size());
          return {t, ctx_to_pis(uty.cx, uty.head)};
        }
        throw Diag(r->pos, "meta-variable '" + hd + "' applied to " +
                               std::to_string(args.size()) + " arguments, expects " +
                               std::to_string(uty.cx.decls.size()));
      }
      Subst s;
      for (size_t i = 0; i < args.size(); i++) {
        Subst prefix;
        prefix.entries = s.entries;
        TypePtr want = uty.cx.decls[i].type;
        if (!(prefix.entries.empty() && max_free_bvar(want, 0) < 0))
          want = apply_subst_type(prefix, want);
        s.entries.push_back(elab_check(cx, args[i], want));
      }
      TypePtr res = args.empty() ? uty.head : apply_subst_type(s, uty.head);
      return {args.empty() ? mk_mvar(hd) : mk_mvar(hd, std::move(s)), res};
    } else if (const LFConst* c = sig_.lf_const(hd)) {
      h.kind = Head::Const;
      h.name = hd;
      ty = c->type;
      std::vector<TermPtr> spine;
      for (int i = 0; i < c->implicits && ty->is_pi; i++) {
        TermPtr u = insert_implicit(cx, ty->dom, ty->binder_hint);
        spine.push_back(u);
        ty = subst_top_type(ty->cod, u);
      }
      return elab_spine(cx, r, std::move(h), std::move(spine), ty, args);
    } else {
      throw Diag(r->pos, "undeclared identifier '" + hd + "'");
    }
    return elab_spine(cx, r, std::move(h), {}, ty, args);
  }

  std::pair<TermPtr, TypePtr> elab_spine(const LFCtx& cx, const RawPtr& r,
                                         Head h, std::vector<TermPtr> spine,
                                         TypePtr ty,
                                         const std::vector<RawPtr>& args) {
    for (auto& a : args) {
      TypePtr z = zonk_type(ty, look());
      if (!z->is_pi) throw Diag(a->pos, "term applied to too many arguments");
      TermPtr t = elab_check(cx, a, z->dom);
      spine.push_back(t);
      ty = subst_top_type(z->cod, t);
    }
    return {mk_neutral(std::move(h), std::move(spine)),
            zonk_type(ty, look())};
  }

  // ------------------------------------------------------- LF promotion

  void collect_metas(const TermPtr& t, std::vector<std::string>& out,
                     std::set<std::string>& seen) const {
    if (t->is_lam()) {
      collect_metas(t->lam_body, out, seen);
      return;
    }
    if (t->head.kind == Head::MVar) {
      const std::string& u = t->head.name;
      for (auto& e : t->head.sub.entries) collect_metas(e, out, seen);
      if (!seen.count(u) && !bound_meta_.count(u) && !store_.bound(u)) {
        seen.insert(u);
        // dependencies via the meta-variable's own type first
        MetaType uty = zonk_metatype(mtypes_.at(u), look());
        for (auto& d : uty.cx.decls) collect_metas_t(d.type, out, seen);
        collect_metas_t(uty.head, out, seen);
        out.push_back(u);
      }
    }
    for (auto& a : t->spine) collect_metas(a, out, seen);
  }
  void collect_metas_t(const TypePtr& a, std::vector<std::string>& out,
                       std::set<std::string>& seen) const {
    if (a->is_pi) {
      collect_metas_t(a->dom, out, seen);
      collect_metas_t(a->cod, out, seen);
      return;
    }
    for (auto& t : a->args) collect_metas(t, out, seen);
  }

  // Abstracts the remaining meta-variables of a declaration type as leading
  // implicit binders. Returns the closed type and the number added.
  std::pair<TypePtr, int> promote_lf(const TypePtr& raw_ty) {
    TypePtr ty = zonk_type(raw_ty, look());
    std::vector<std::string> us;
    std::set<std::string> seen;
    collect_metas_t(ty, us, seen);
    if (us.empty()) return {ty, 0};
    int n = (int)us.size();
    std::map<std::string, int> pos;
    for (int i = 0; i < n; i++) pos[us[i]] = i;
    // binder hints: user names as written, insertion variables by their
    // display hint, freshened against each other
    std::vector<std::string> hints(n);
    {
      std::set<std::string> used;
      for (int i = 0; i < n; i++) {
        std::string h = pretty_hint(us[i]);
        std::string cand = h;
        int c = 0;
        while (used.count(cand)) cand = h + std::to_string(++c);
        used.insert(cand);
        hints[i] = cand;
      }
    }
    TypePtr core = abstract_type(ty, pos, n, 0);
    for (int i = n - 1; i >= 0; i--) {
      MetaType uty = zonk_metatype(mtypes_.at(us[i]), look());
      TypePtr dom = ctx_to_pis(uty.cx, uty.head);
      dom = abstract_type(dom, pos, i, 0);
      core = mk_pi(true, dom, core, hints[i]);
    }
    return {core, n};
  }

  // Replaces occurrences of promoted meta-variables with bound variables;
  // `limit` = how many promoted binders are in scope (prefix of the order).
  TermPtr abstract_term(const TermPtr& t, const std::map<std::string, int>& pos,
                        int limit, int depth) const {
    if (t->is_lam())
      return mk_lam(abstract_term(t->lam_body, pos, limit, depth + 1),
                    t->binder_hint);
    std::vector<TermPtr> sp;
    for (auto& a : t->spine) sp.push_back(abstract_term(a, pos, limit, depth));
    const Head& h = t->head;
    if (h.kind == Head::MVar) {
      auto it = pos.find(h.name);
      if (it != pos.end() && it->second < limit) {
        std::vector<TermPtr> args;
        for (auto& e : h.sub.entries)
          args.push_back(abstract_term(e, pos, limit, depth));
        for (auto& a : sp) args.push_back(a);
        return mk_bvar(depth + (limit - 1 - it->second), std::move(args));
      }
      Head nh = h;
      Subst ns;
      ns.wk = h.sub.wk;
      for (auto& e : h.sub.entries)
        ns.entries.push_back(abstract_term(e, pos, limit, depth));
      nh.sub = std::move(ns);
      return mk_neutral(std::move(nh), std::move(sp));
    }
    return mk_neutral(h, std::move(sp));
  }
  TypePtr abstract_type(const TypePtr& a, const std::map<std::string, int>& pos,
                        int limit, int depth) const {
    if (a->is_pi)
      return mk_pi(a->param, abstract_type(a->dom, pos, limit, depth),
                   abstract_type(a->cod, pos, limit, depth + 1),
                   a->binder_hint);
    std::vector<TermPtr> args;
    for (auto& t : a->args) args.push_back(abstract_term(t, pos, limit, depth));
    return mk_atom(a->family, std::move(args));
  }

  // -------------------------------------------------------- declarations

  void elab_family(const RawDecl& d) {
    reset_decl_state(false);
    TypePtr kind = elab_type(LFCtx{}, d.type);
    auto [k, imps] = promote_lf(kind);
    check_is_kind(k, d.pos);
    LFFamily fam;
    fam.name = d.name;
    fam.kind = k;
    fam.implicits = imps;
    sig_.families.push_back(fam);
    for (auto& [cn, craw] : d.ctors) {
      if (sig_.declared(cn))
        throw Diag(d.pos, "duplicate declaration '" + cn + "'");
      reset_decl_state(false);
      TypePtr cty = elab_type(LFCtx{}, craw);
      auto [ct, cimps] = promote_lf(cty);
      LFConst c;
      c.name = cn;
      c.type = ct;
      c.implicits = cimps;
      TypePtr tgt = ct;
      while (tgt->is_pi) tgt = tgt->cod;
      c.family = tgt->family;
      if (c.family != d.name)
        throw Diag(d.pos, "constructor " + cn + " does not target " + d.name);
      sig_.consts.push_back(c);
      sig_.families.back().ctors.push_back(cn);
    }
  }

  static void check_is_kind(const TypePtr& k, Pos pos) {
    TypePtr c = k;
    while (c->is_pi) c = c->cod;
    if (c->family != "type")
      throw Diag(pos, "a family's classifier must end in 'type'");
  }

  // ------------------------------------------------------- comp level

  MetaType elab_metatype(const LFCtx&, const RawPtr& r) {
    if (r->kind == RawNode::Name) {
      // schema reference
      if (!sig_.schemas.count(r->name))
        throw Diag(r->pos, "undeclared schema '" + r->name + "'");
      MetaType u;
      u.kind = MetaType::Schema;
      u.schema = r->name;
      return u;
    }
    if (r->kind != RawNode::Box)
      throw Diag(r->pos, "expected a boxed type or schema name");
    LFCtx cx = elab_lfctx(r->cx, r->pos);
    TypePtr head = elab_type(cx, r->a);
    if (head->is_pi)
      throw Diag(r->pos, "boxed type must be atomic");
    return mk_boxed(cx, head);
  }

  LFCtx elab_lfctx(const RawCtx& rc, Pos pos) {
    LFCtx cx;
    cx.var = rc.var;
    for (auto& e : rc.entries) {
      if (!e.type) {
        auto it = mtypes_.find(e.name);
        if (!cx.var && cx.decls.empty() && it != mtypes_.end() &&
            it->second.kind == MetaType::Schema) {
          cx.var = e.name;  // context variable in head position
          continue;
        }
        throw Diag(pos, "context entry '" + e.name + "' needs a type");
      }
      TypePtr t = elab_type(cx, e.type);
      cx.decls.push_back(CtxDecl{e.name, t, false});
    }
    return cx;
  }

  CTypePtr elab_ctype(const RawPtr& r) {
    switch (r->kind) {
      case RawNode::Binder: {
        MetaType u = elab_metatype(LFCtx{}, r->a);
        std::string n = r->name;
        register_meta(n, u, true);
        CTypePtr body = elab_ctype(r->b);
        bound_meta_.erase(n);  // scope ends; keep type for later zonking
        return mk_ctpibox(n, u, body, false);
      }
      case RawNode::Arrow: {
        CTypePtr l = elab_ctype(r->a);  // left-to-right, first use fixes types
        CTypePtr rr = elab_ctype(r->b);
        return mk_ctarrow(l, rr);
      }
      case RawNode::Box: {
        LFCtx cx = elab_lfctx(r->cx, r->pos);
        TypePtr head = elab_type(cx, r->a);
        if (head->is_pi) throw Diag(r->pos, "boxed type must be atomic");
        return mk_ctbox(cx, head);
      }
      case RawNode::Name:
      case RawNode::App: {
        std::string hd;
        std::vector<RawPtr> args;
        if (r->kind == RawNode::Name) {
          hd = r->name;
        } else if (r->parts[0]->kind == RawNode::Name) {
          hd = r->parts[0]->name;
          args.assign(r->parts.begin() + 1, r->parts.end());
        } else {
          throw Diag(r->pos, "expected a computation type");
        }
        const CompTypeDecl* ct = sig_.ctype(hd);
        if (!ct) throw Diag(r->pos, "undeclared computation type '" + hd + "'");
        if (args.size() != ct->indices.size())
          throw Diag(r->pos, hd + " expects " +
                                 std::to_string(ct->indices.size()) +
                                 " indices, got " + std::to_string(args.size()));
        std::vector<MetaTerm> margs;
        MetaSubst th;
        for (size_t i = 0; i < args.size(); i++) {
          MetaType want = apply_msubst(th, ct->indices[i].second);
          MetaTerm m = elab_metaterm(args[i], want);
          th[ct->indices[i].first] = m;
          margs.push_back(std::move(m));
        }
        return mk_ctatomic(hd, std::move(margs));
      }
      default:
        throw Diag(r->pos, "expected a computation type");
    }
  }

  MetaTerm elab_metaterm(const RawPtr& r, const MetaType& want) {
    if (want.kind == MetaType::Schema)
      throw Diag(r->pos, "context arguments are not supported here");
    if (r->kind == RawNode::Box) {
      LFCtx cx = elab_lfctx(r->cx, r->pos);
      if (!equal_ctx(zonk_ctx(cx, look()), zonk_ctx(want.cx, look())))
        throw Diag(r->pos, "context of boxed argument does not match");
      TermPtr t = elab_check(cx, r->a, want.head);
      return mk_contextual(cx, t);
    }
    // bare meta-level name or term: checked in the expected context
    TermPtr t = elab_check(want.cx, r, want.head);
    return mk_contextual(want.cx, t);
  }

  // Promotes leftover meta-variables of a computation type to implicit
  // quantifiers (named binders; occurrences stay put).
  CTypePtr promote_ctype(const CTypePtr& raw) {
    CTypePtr ty = zonk_ctype(raw, look());
    std::vector<std::string> us;
    std::set<std::string> seen;
    collect_metas_c(ty, us, seen);
    // surviving insertion metas get printable names before becoming binders
    MetaSubst ren;
    for (auto& u : us) {
      if (u[0] != '#') continue;
      std::string n = fresh_meta(pretty_hint(u));
      MetaType uty = zonk_metatype(mtypes_.at(u), look());
      TermPtr occ = uty.cx.decls.empty() ? mk_mvar(n)
                                         : mk_mvar(n, id_subst(uty.cx));
      ren[u] = mk_contextual(uty.cx, occ);
      mtypes_[n] = uty;
      u = n;
    }
    if (!ren.empty()) {
      ty = apply_msubst(ren, ty);
      for (auto& u : us)
        mtypes_[u] = apply_msubst(ren, zonk_metatype(mtypes_.at(u), look()));
    }
    for (int i = (int)us.size() - 1; i >= 0; i--) {
      MetaType uty = zonk_metatype(mtypes_.at(us[i]), look());
      ty = mk_ctpibox(us[i], uty, ty, true);
    }
    return ty;
  }
  void collect_metas_c(const CTypePtr& t, std::vector<std::string>& out,
                       std::set<std::string>& seen) const {
    switch (t->kind) {
      case CompType::Box: {
        for (auto& d : t->cx.decls) collect_metas_t(d.type, out, seen);
        collect_metas_t(t->head, out, seen);
        return;
      }
      case CompType::Arrow:
        collect_metas_c(t->left, out, seen);
        collect_metas_c(t->right, out, seen);
        return;
      case CompType::PiBox: {
        if (t->u.kind == MetaType::Box) {
          for (auto& d : t->u.cx.decls) collect_metas_t(d.type, out, seen);
          collect_metas_t(t->u.head, out, seen);
        }
        // the binder name is bound, not free; mask it
        bool was = seen.count(t->name);
        if (!was) seen.insert(t->name);
        collect_metas_c(t->body, out, seen);
        if (!was) seen.erase(t->name);
        return;
      }
      case CompType::Atomic:
        for (auto& a : t->args)
          if (a.kind == MetaTerm::Contextual) {
            for (auto& d : a.cx.decls) collect_metas_t(d.type, out, seen);
            collect_metas(a.term, out, seen);
          }
        return;
    }
  }

  void elab_ctype_decl(const RawDecl& d) {
    CompTypeDecl ct;
    ct.name = d.name;
    ct.stratified = d.kind == RawDecl::CompStratified;
    reset_decl_state(false);
    // indices: {X1 : U1} ... {Xn : Un} ctype
    RawPtr cur = d.type;
    while (cur->kind == RawNode::Binder) {
      MetaType u = elab_metatype(LFCtx{}, cur->a);
      register_meta(cur->name, u, true);
      ct.indices.emplace_back(cur->name, u);
      cur = cur->b;
    }
    if (cur->kind != RawNode::Name || cur->name != "ctype")
      throw Diag(d.pos, "computation type classifier must end in 'ctype'");
    sig_.ctypes.push_back(ct);
    for (auto& [cn, craw] : d.ctors) {
      if (sig_.declared(cn))
        throw Diag(d.pos, "duplicate declaration '" + cn + "'");
      reset_decl_state(false);
      CTypePtr raw = elab_ctype(craw);
      CTypePtr cty = promote_ctype(raw);
      CompConst c;
      c.name = cn;
      c.type = cty;
      CTypePtr tgt = cty;
      int imps = 0;
      while (tgt->kind != CompType::Atomic) {
        if (tgt->kind == CompType::PiBox) {
          if (tgt->implicit) imps++;
          tgt = tgt->body;
        } else if (tgt->kind == CompType::Arrow) {
          tgt = tgt->right;
        } else {
          throw Diag(d.pos, "constructor " + cn + " does not target " + d.name);
        }
      }
      c.implicits = imps;
      c.target = tgt->name;
      if (c.target != d.name)
        throw Diag(d.pos, "constructor " + cn + " does not target " + d.name);
      sig_.cconsts.push_back(c);
      sig_.ctypes.back().ctors.push_back(cn);
    }
  }

  void elab_theorem(const RawDecl& d) {
    reset_decl_state(false);
    CTypePtr ty = promote_ctype(elab_ctype(d.type));
    TheoremDecl t;
    t.name = d.name;
    t.type = ty;
    t.totality = d.totality;
    sig_.theorems.push_back(t);  // in scope for a recursive body
    if (d.body) {
      reset_decl_state(true);
      // bring implicit and explicit quantifier names of the statement into
      // scope? no: a rec body binds everything itself (fn/mlam)
      CExprPtr body = elab_cexpr(d.body, {}, {});
      for (auto& th : sig_.theorems)
        if (th.name == d.name) th.body = body;
    }
  }

  // -------------------------------------------------------- scripts

  void elab_proof(const RawDecl& d) {
    reset_decl_state(false);
    CTypePtr ty = promote_ctype(elab_ctype(d.script.type));
    ProofScript ps;
    ps.theorem = d.name;
    ps.type = ty;
    ps.totality = d.script.totality;
    // the theorem is visible to its own script (induction) and to later ones
    TheoremDecl t;
    t.name = d.name;
    t.type = ty;
    t.totality = d.script.totality;
    sig_.theorems.push_back(t);

    reset_decl_state(true);
    for (auto& [n, raw] : d.script.delta) {
      MetaType u = elab_metatype(LFCtx{}, raw);
      register_meta(n, u, true);
      ps.delta.push_back(MetaDecl{n, u, true});
    }
    std::vector<std::string> cvars;
    for (auto& [n, raw] : d.script.gamma) {
      CTypePtr g = elab_ctype(raw);
      ps.gamma.emplace_back(n, g);
      cvars.push_back(n);
    }
    std::set<std::string> metas = bound_meta_;
    ps.solve = elab_cexpr(d.script.solve, cvars, metas);
    scripts_.push_back(std::move(ps));
  }

  // Computation expressions. `cvars` = computation variables in scope,
  // `metas` = meta-variable names in scope.
  CExprPtr elab_cexpr(const RawPtr& r, std::vector<std::string> cvars,
                      std::set<std::string> metas) {
    switch (r->kind) {
      case RawNode::Name: {
        for (auto& v : cvars)
          if (v == r->name) return mk_cvar(r->name);
        if (sig_.theorem(r->name) || sig_.comp_const(r->name))
          return mk_cconst(r->name);
        throw Diag(r->pos, "undeclared identifier '" + r->name + "'");
      }
      case RawNode::Hole:
        return mk_chole(r->name);
      case RawNode::Box: {
        return elab_cbox(r, metas);
      }
      case RawNode::App: {
        CExprPtr acc = elab_cexpr(r->parts[0], cvars, metas);
        for (size_t i = 1; i < r->parts.size(); i++) {
          const RawPtr& p = r->parts[i];
          if (p->kind == RawNode::Box) {
            CExprPtr b = elab_cbox(p, metas);
            acc = mk_cmapp(acc, mk_contextual(b->cx, b->term));
          } else {
            acc = mk_capp(acc, elab_cexpr(p, cvars, metas));
          }
        }
        return acc;
      }
      case RawNode::Fn: {
        cvars.push_back(r->name);
        return mk_cfn(r->name, elab_cexpr(r->a, cvars, metas));
      }
      case RawNode::MLam: {
        metas.insert(r->name);
        return mk_cmlam(r->name, elab_cexpr(r->a, cvars, metas));
      }
      case RawNode::Let:
        return elab_let(r, cvars, metas);
      case RawNode::Case: {
        auto e = std::make_shared<CompExpr>();
        e->scrut = elab_cexpr(r->a, cvars, metas);
        bool comp = !r->branches.empty() &&
                    r->branches[0].pat.kind == RawPattern::CompPat;
        e->kind = comp ? CompExpr::CaseComp : CompExpr::CaseMeta;
        for (auto& br : r->branches) {
          if ((br.pat.kind == RawPattern::CompPat) != comp)
            throw Diag(br.pat.pos, "mixed pattern kinds in case");
          add_branch(*e, br.pat, br.body, cvars, metas);
        }
        return e;
      }
      case RawNode::Impossible: {
        auto e = std::make_shared<CompExpr>();
        e->kind = CompExpr::CaseMeta;
        e->scrut = elab_cexpr(r->a, cvars, metas);
        return e;
      }
      default:
        throw Diag(r->pos, "expected a computation expression");
    }
  }

  // [cx |- t] as an expression; t elaborated without an expected type.
  CExprPtr elab_cbox(const RawPtr& r, const std::set<std::string>& metas) {
    std::set<std::string> saved = bound_meta_;
    bound_meta_ = metas;
    LFCtx cx = elab_lfctx(r->cx, r->pos);
    TermPtr t;
    if (r->a->kind == RawNode::Lam) {
      throw Diag(r->pos, "boxed terms must be of atomic type");
    }
    auto [tm, ty] = elab_neutral(cx, r->a);
    (void)ty;
    t = tm;
    bound_meta_ = saved;
    return mk_cbox(cx, t);
  }

  void add_branch(CompExpr& e, const RawPattern& pat, const RawPtr& body,
                  std::vector<std::string> cvars, std::set<std::string> metas) {
    if (pat.kind == RawPattern::CompPat) {
      CompBranch b;
      b.ctor = pat.ctor;
      const CompConst* c = sig_.comp_const(pat.ctor);
      if (!c) throw Diag(pat.pos, "undeclared constructor '" + pat.ctor + "'");
      b.args = pat.args;
      // argument names bind: quantifier args as metas, arrow args as vars
      CTypePtr t = c->type;
      size_t ai = 0;
      while (t->kind != CompType::Atomic && ai < b.args.size()) {
        if (t->kind == CompType::PiBox) {
          if (!t->implicit) metas.insert(b.args[ai++]);
          t = t->body;
        } else if (t->kind == CompType::Arrow) {
          cvars.push_back(b.args[ai++]);
          t = t->right;
        } else {
          break;
        }
      }
      b.body = elab_cexpr(body, cvars, metas);
      e.cbranches.push_back(std::move(b));
      return;
    }
    // boxed LF pattern: constructor applied to fresh pattern variables
    if (pat.cx.var || !pat.cx.entries.empty())
      throw Diag(pat.pos, "patterns in non-empty contexts are not supported");
    MetaBranch b;
    std::string ctor;
    std::vector<std::string> argnames;
    if (pat.body->kind == RawNode::Name) {
      ctor = pat.body->name;
    } else if (pat.body->kind == RawNode::App &&
               pat.body->parts[0]->kind == RawNode::Name) {
      ctor = pat.body->parts[0]->name;
      for (size_t i = 1; i < pat.body->parts.size(); i++) {
        if (pat.body->parts[i]->kind != RawNode::Name)
          throw Diag(pat.pos, "pattern arguments must be variables");
        argnames.push_back(pat.body->parts[i]->name);
      }
    } else {
      throw Diag(pat.pos, "malformed pattern");
    }
    const LFConst* c = sig_.lf_const(ctor);
    if (!c) throw Diag(pat.pos, "undeclared constructor '" + ctor + "'");
    // spine: implicit positions get fresh names, explicit ones the written
    // names; types are reconstructed by the checker
    std::vector<TermPtr> spine;
    TypePtr ty = c->type;
    MetaType holder = mk_boxed(LFCtx{}, mk_atom("_"));
    int explicit_needed = 0;
    {
      TypePtr t2 = ty;
      int total = 0;
      while (t2->is_pi) {
        total++;
        t2 = t2->cod;
      }
      explicit_needed = total - c->implicits;
    }
    if ((int)argnames.size() != explicit_needed)
      throw Diag(pat.pos, "constructor " + ctor + " expects " +
                              std::to_string(explicit_needed) +
                              " pattern arguments");
    int ei = 0;
    TypePtr t2 = ty;
    for (int i = 0; t2->is_pi; i++, t2 = t2->cod) {
      std::string n;
      if (i < c->implicits) {
        std::string hint = t2->binder_hint.empty() ? "X" : t2->binder_hint;
        n = hint;
        int cc = 0;
        auto used = [&](const std::string& s) {
          if (metas.count(s)) return true;
          for (auto& sp : spine)
            if (sp->head.kind == Head::MVar && sp->head.name == s) return true;
          return false;
        };
        while (used(n) || sig_.declared(n)) n = hint + std::to_string(++cc);
      } else {
        n = argnames[ei++];
      }
      spine.push_back(mk_mvar(n));
      b.pat_vars.emplace_back(n, holder);
      metas.insert(n);
    }
    b.pat = mk_const(ctor, std::move(spine));
    b.body = elab_cexpr(body, cvars, metas);
    if (pat.ascription) {
      std::set<std::string> saved = bound_meta_;
      bound_meta_ = metas;
      e.ascription = elab_ctype(pat.ascription);
      bound_meta_ = saved;
    }
    e.mbranches.push_back(std::move(b));
  }

  CExprPtr elab_let(const RawPtr& r, std::vector<std::string> cvars,
                    std::set<std::string> metas) {
    CExprPtr scrut = elab_cexpr(r->a, cvars, metas);
    const RawPattern& pat = r->pat;
    if (pat.kind == RawPattern::BoxPat && pat.body->kind == RawNode::Name &&
        !sig_.lf_const(pat.body->name)) {
      // plain unboxing let
      metas.insert(pat.body->name);
      return mk_cletbox(pat.body->name, scrut, elab_cexpr(r->b, cvars, metas));
    }
    auto e = std::make_shared<CompExpr>();
    e->scrut = scrut;
    e->is_let = true;
    e->kind = pat.kind == RawPattern::CompPat ? CompExpr::CaseComp
                                              : CompExpr::CaseMeta;
    add_branch(*e, pat, r->b, cvars, metas);
    return e;
  }
};

// Entry points.
inline ElabResult elaborate(const std::string& text) {
  Elaborator e;
  return e.run(parse_signature(text));
}

}  // namespace blf
