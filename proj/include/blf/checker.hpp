#pragma once

// Proof checker. Verifies a complete proof script against its statement:
// the intros block must match the statement's quantifiers and hypotheses,
// the solve expression is checked rule by rule, case splits are checked for
// coverage against the signature, and the declared totality order is
// enforced on recursive calls. The only unification performed is pattern
// unification for (a) the implicit arguments of constants inside boxed terms
// and (b) index refinement when entering a case branch.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "blf/ast.hpp"
#include "blf/print.hpp"
#include "blf/subst.hpp"
#include "blf/typecheck.hpp"
#include "blf/unify.hpp"

namespace blf {

struct CheckOptions {
  bool allow_holes = false;
};

class ProofChecker {
 public:
  ProofChecker(const Signature& sig, CheckOptions opt = {})
      : sig_(sig), opt_(opt) {}

  // Throws Diag on any violation. On success with allow_holes, `holes` lists
  // the holes encountered together with their expected types.
  std::vector<std::pair<std::string, CTypePtr>> holes;

  void check_script(const ProofScript& ps) {
    store_ = MetaStore();
    holes.clear();
    Env env;
    // declared meta context, checked left to right
    for (auto& d : ps.delta) {
      wf_metatype(env, d.type);
      env.metas[d.name] = d.type;
      env.universal.insert(d.name);
    }
    for (auto& [n, t] : ps.gamma) {
      wf_ctype(env, t);
      env.gamma[n] = t;
    }
    // the intros block must match the statement
    CTypePtr goal = ps.type;
    size_t di = 0, gi = 0;
    MetaSubst ren;
    while (true) {
      if (goal->kind == CompType::PiBox) {
        if (di >= ps.delta.size())
          throw Diag("intros: statement quantifier '" + goal->name +
                     "' has no matching meta declaration");
        const MetaDecl& d = ps.delta[di++];
        MetaType want = apply_msubst(ren, goal->u);
        if (!match_metatype(env, want, d.type))
          throw Diag("intros: declaration of '" + d.name +
                     "' does not match the statement");
        if (goal->name != d.name)
          ren[goal->name] = meta_id_occurrence(d.name, d.type);
        goal = goal->body;
        continue;
      }
      if (goal->kind == CompType::Arrow) {
        if (gi >= ps.gamma.size())
          throw Diag("intros: statement hypothesis has no matching assumption");
        CTypePtr want = apply_msubst(ren, goal->left);
        Unifier un(sig_, store_, env.metas, internal_name);
        if (un.ctype(want, ps.gamma[gi].second) != UnifyResult::Solved)
          throw Diag("intros: assumption '" + ps.gamma[gi].first +
                     "' does not match the statement");
        gi++;
        goal = goal->right;
        continue;
      }
      break;
    }
    if (di != ps.delta.size())
      throw Diag("intros: extra meta declaration '" + ps.delta[di].name + "'");
    if (gi != ps.gamma.size())
      throw Diag("intros: extra assumption '" + ps.gamma[gi].first + "'");
    goal = apply_msubst(ren, goal);

    // totality bookkeeping
    self_ = ps.theorem;
    self_total_ = ps.totality;
    if (ps.totality) setup_induction(ps, env);

    check_expr(env, ps.solve, goal);
    if (!opt_.allow_holes && !holes.empty()) {
      std::string names;
      for (auto& h : holes) names += (names.empty() ? "?" : ", ?") + h.first;
      throw Diag("proof has holes: " + names);
    }
  }

  // View of an expression with every meta-variable the last check solved
  // substituted away (useful for comparing scripts whose implicit arguments
  // were reconstructed).
  CExprPtr resolved(const CExprPtr& e) const {
    return zonk_cexpr(e, store_lookup(store_));
  }

  // Checks a closed expression (rec definition body) against a type.
  void check_closed(const std::string& self, std::optional<int> totality,
                    const CExprPtr& e, const CTypePtr& ty) {
    store_ = MetaStore();
    holes.clear();
    self_ = self;
    self_total_ = totality;
    // no intros: the body binds its own arguments, so structural totality
    // roots are established when its fn/mlam binders are crossed
    Env env;
    if (totality) {
      ind_family_ = family_of_explicit_arg(ty, *totality);
      ind_pending_ = explicit_position(ty, *totality);
    }
    check_expr(env, e, ty);
  }

 private:
  const Signature& sig_;
  CheckOptions opt_;
  MetaStore store_;
  std::string self_;
  std::optional<int> self_total_;
  std::string ind_family_;
  int ind_pending_ = -1;  // explicit binder index still to be crossed
  int ins_ = 0;           // fresh names for reconstructed implicits

  struct Env {
    MetaTypeEnv metas;                      // every meta name in scope
    std::set<std::string> universal;        // rigid during expression checking
    std::map<std::string, CTypePtr> gamma;  // computation variables
    // totality: roots are the induction argument itself; sub holds names of
    // strict subterms obtained by splitting a root or another subterm
    std::set<std::string> meta_roots, meta_sub, comp_roots;
  };

  static MetaTerm meta_id_occurrence(const std::string& n, const MetaType& ty) {
    LFCtx cx = ty.kind == MetaType::Box ? ty.cx : LFCtx{};
    TermPtr occ =
        cx.decls.empty() ? mk_mvar(n) : mk_mvar(n, id_subst(cx));
    return mk_contextual(cx, occ);
  }

  Unifier::IsFlex rigid_universals(const Env& env) const {
    const std::set<std::string>* u = &env.universal;
    return [u](const std::string& n) { return !u->count(n); };
  }
  static bool all_flex(const std::string&) { return true; }

  MetaLookup look() const { return store_lookup(store_); }

  // ------------------------------------------------------ well-formedness

  // Kinding that reconstructs: implicit arguments inserted by elaboration
  // ('?'/'#' names) adopt the type of the position they occupy.
  void uwf_type(Env& env, const LFCtx& cx, const TypePtr& a) {
    if (a->is_pi) {
      uwf_type(env, cx, a->dom);
      LFCtx cx2 = cx;
      cx2.decls.push_back(CtxDecl{a->binder_hint, a->dom, a->param});
      uwf_type(env, cx2, a->cod);
      return;
    }
    const LFFamily* f = sig_.family(a->family);
    if (!f) throw Diag("undeclared type family '" + a->family + "'");
    TypePtr k = f->kind;
    for (auto& arg : a->args) {
      TypePtr z = zonk_type(k, look());
      if (!z->is_pi) throw Diag("too many arguments to family " + a->family);
      ucheck(env, cx, arg, z->dom);
      k = subst_top_type(z->cod, arg);
    }
    k = zonk_type(k, look());
    if (k->is_pi || k->family != "type")
      throw Diag("family " + a->family + " is not fully applied");
  }
  void uwf_ctx(Env& env, const LFCtx& cx) {
    LFCtx prefix;
    prefix.var = cx.var;
    for (auto& d : cx.decls) {
      uwf_type(env, prefix, d.type);
      prefix.decls.push_back(d);
    }
  }

  // Matches a declared type against the statement's, solving elaboration
  // metas ('?'/'#') on either side; solutions persist in the store so later
  // uses of the declaration see the resolved view.
  bool match_metatype(Env& env, const MetaType& want, const MetaType& got) {
    if (want.kind != got.kind) return false;
    if (want.kind == MetaType::Schema) return want.schema == got.schema;
    LFCtx ca = zonk_ctx(want.cx, look()), cb = zonk_ctx(got.cx, look());
    if (ca.var != cb.var || ca.decls.size() != cb.decls.size()) return false;
    Unifier un(sig_, store_, env.metas, internal_name);
    LFCtx prefix;
    prefix.var = cb.var;
    for (size_t i = 0; i < ca.decls.size(); i++) {
      if (un.type(prefix, ca.decls[i].type, cb.decls[i].type) !=
          UnifyResult::Solved)
        return false;
      prefix.decls.push_back(cb.decls[i]);
    }
    return un.type(prefix, want.head, got.head) == UnifyResult::Solved;
  }

  void wf_metatype(Env& env, const MetaType& u) {
    if (u.kind == MetaType::Schema) {
      if (!sig_.schemas.count(u.schema))
        throw Diag("undeclared schema '" + u.schema + "'");
      return;
    }
    uwf_ctx(env, u.cx);
    uwf_type(env, u.cx, u.head);
  }
  void wf_ctype(Env& env, const CTypePtr& t) {
    switch (t->kind) {
      case CompType::Box: {
        uwf_ctx(env, t->cx);
        uwf_type(env, t->cx, t->head);
        return;
      }
      case CompType::Arrow:
        wf_ctype(env, t->left);
        wf_ctype(env, t->right);
        return;
      case CompType::PiBox: {
        wf_metatype(env, t->u);
        Env e2 = env;
        e2.metas[t->name] = t->u;
        e2.universal.insert(t->name);
        wf_ctype(e2, t->body);
        return;
      }
      case CompType::Atomic: {
        const CompTypeDecl* d = sig_.ctype(t->name);
        if (!d) throw Diag("undeclared computation type '" + t->name + "'");
        if (d->indices.size() != t->args.size())
          throw Diag("wrong number of indices for " + t->name);
        MetaSubst th;
        for (size_t i = 0; i < t->args.size(); i++) {
          MetaType want = apply_msubst(th, d->indices[i].second);
          check_metaterm(env, t->args[i], want);
          th[d->indices[i].first] = t->args[i];
        }
        return;
      }
    }
  }

  void check_metaterm(Env& env, const MetaTerm& c, const MetaType& want) {
    if (want.kind == MetaType::Schema)
      throw Diag("context arguments are not supported");
    if (c.kind != MetaTerm::Contextual)
      throw Diag("expected a contextual term");
    LFCtx wcx = zonk_ctx(want.cx, look());
    if (!equal_ctx(zonk_ctx(c.cx, look()), wcx))
      throw Diag("context mismatch in boxed argument");
    ucheck(env, wcx, c.term, want.head);
  }

  // -------------------------------------- LF checking with reconstruction

  static TermPtr push_var(const TermPtr& t) {
    TermPtr s = shift_term(t, 1, 0);
    std::vector<TermPtr> sp = s->spine;
    sp.push_back(mk_bvar(0));
    return mk_neutral(s->head, std::move(sp));
  }

  static bool internal_name(const std::string& n) {
    return !n.empty() && (n[0] == '?' || n[0] == '#');
  }

  void ucheck(Env& env, const LFCtx& cx, const TermPtr& t, TypePtr a) {
    a = zonk_type(a, look());
    if (a->is_pi) {
      LFCtx cx2 = cx;
      cx2.decls.push_back(
          CtxDecl{t->is_lam() ? t->binder_hint : "x", a->dom, a->param});
      ucheck(env, cx2, t->is_lam() ? t->lam_body : push_var(t), a->cod);
      return;
    }
    if (t->is_lam())
      throw Diag("lambda checked against atomic type " +
                 Printer(&sig_).type(a));
    TermPtr z = zonk_term(t, look());
    if (z->is_lam()) {  // instantiation revealed a redex-free lambda
      ucheck(env, cx, z, a);
      return;
    }
    // a bare, still-untyped implicit: adopt the expected type
    if (z->head.kind == Head::MVar && internal_name(z->head.name) &&
        !env.metas.count(z->head.name) && z->spine.empty()) {
      adopt_implicit_type(env, cx, z, a);
      return;
    }
    TypePtr got = uinfer(env, cx, z);
    Unifier un(sig_, store_, env.metas, rigid_universals(env));
    if (un.type(cx, got, a) != UnifyResult::Solved)
      throw Diag("type mismatch: expected " +
                 Printer(&sig_).type(zonk_type(a, look()), names(cx)) +
                 ", found " +
                 Printer(&sig_).type(zonk_type(got, look()), names(cx)) +
                 " for " + Printer(&sig_).term(z, names(cx)));
  }

  void adopt_implicit_type(Env& env, const LFCtx& cx, const TermPtr& z,
                           const TypePtr& a) {
    const std::string& u = z->head.name;
    if (z->head.sub.is_empty()) {
      if (has_free_bvar(a))
        throw Diag("cannot reconstruct implicit argument '" + u + "'");
      env.metas[u] = mk_boxed(LFCtx{}, a);
      return;
    }
    // pattern substitution: close the expected type over the pattern image
    std::vector<int> img;
    LFCtx ucx;
    for (auto& e : z->head.sub.entries) {
      if (e->is_lam() || e->head.kind != Head::BVar || !e->spine.empty())
        throw Diag("cannot reconstruct implicit argument '" + u + "'");
      img.push_back(e->head.index);
    }
    TypePtr inv = invert_type(a, img, cx, u);
    for (size_t i = 0; i < img.size(); i++) {
      const CtxDecl& d = cx.decls[cx.decls.size() - 1 - img[i]];
      ucx.decls.push_back(
          CtxDecl{d.name,
                  invert_type_at(shift_type(d.type, img[i] + 1, 0), img,
                                 (int)i, u),
                  d.param});
    }
    env.metas[u] = mk_boxed(ucx, inv);
  }

  static bool has_free_bvar_t(const TermPtr& t, int depth) {
    if (t->is_lam()) return has_free_bvar_t(t->lam_body, depth + 1);
    if (t->head.kind == Head::BVar && t->head.index >= depth) return true;
    for (auto& e : t->head.sub.entries)
      if (has_free_bvar_t(e, depth)) return true;
    for (auto& a : t->spine)
      if (has_free_bvar_t(a, depth)) return true;
    return false;
  }
  static bool has_free_bvar(const TypePtr& a, int depth = 0) {
    if (a->is_pi)
      return has_free_bvar(a->dom, depth) || has_free_bvar(a->cod, depth + 1);
    for (auto& t : a->args)
      if (has_free_bvar_t(t, depth)) return true;
    return false;
  }

  TypePtr invert_type(const TypePtr& a, const std::vector<int>& img,
                      const LFCtx&, const std::string& u) const {
    return invert_type_at(a, img, (int)img.size(), u);
  }
  TypePtr invert_type_at(const TypePtr& a, const std::vector<int>& img,
                         int limit, const std::string& u, int depth = 0) const {
    if (a->is_pi)
      return mk_pi(a->param, invert_type_at(a->dom, img, limit, u, depth),
                   invert_type_at(a->cod, img, limit, u, depth + 1),
                   a->binder_hint);
    std::vector<TermPtr> as;
    for (auto& t : a->args)
      as.push_back(invert_term_at(t, img, limit, u, depth));
    return mk_atom(a->family, std::move(as));
  }
  TermPtr invert_term_at(const TermPtr& t, const std::vector<int>& img,
                         int limit, const std::string& u, int depth) const {
    if (t->is_lam())
      return mk_lam(invert_term_at(t->lam_body, img, limit, u, depth + 1),
                    t->binder_hint);
    Head h = t->head;
    if (h.kind == Head::BVar && h.index >= depth) {
      int src = h.index - depth, tgt = -1;
      for (int i = 0; i < limit && i < (int)img.size(); i++)
        if (img[i] == src) tgt = limit - 1 - i;
      if (tgt < 0)
        throw Diag("cannot reconstruct implicit argument '" + u + "'");
      h.index = tgt + depth;
    }
    if (h.kind == Head::MVar) {
      Subst ns;
      ns.wk = h.sub.wk;
      for (auto& e : h.sub.entries)
        ns.entries.push_back(invert_term_at(e, img, limit, u, depth));
      h.sub = std::move(ns);
    }
    std::vector<TermPtr> sp;
    for (auto& a : t->spine)
      sp.push_back(invert_term_at(a, img, limit, u, depth));
    return mk_neutral(std::move(h), std::move(sp));
  }

  TypePtr uinfer(Env& env, const LFCtx& cx, const TermPtr& t) {
    TypePtr ty;
    switch (t->head.kind) {
      case Head::Const: {
        if (auto* c = sig_.lf_const(t->head.name)) {
          ty = c->type;
          break;
        }
        throw Diag("undeclared constant '" + t->head.name + "'");
      }
      case Head::BVar: {
        int n = (int)cx.decls.size();
        if (t->head.index < 0 || t->head.index >= n)
          throw Diag("variable index out of scope");
        ty = shift_type(cx.decls[n - 1 - t->head.index].type,
                        t->head.index + 1, 0);
        break;
      }
      case Head::MVar: {
        auto it = env.metas.find(t->head.name);
        if (it == env.metas.end())
          throw Diag("unknown meta-variable '" + t->head.name + "'");
        if (it->second.kind != MetaType::Box)
          throw Diag("'" + t->head.name + "' is not a contextual variable");
        MetaType u = zonk_metatype(it->second, look());
        const Subst& s = t->head.sub;
        if (s.is_empty() && !u.cx.decls.empty()) {
          if (t->spine.empty() && equal_ctx(zonk_ctx(cx, look()), u.cx)) {
            ty = u.head;  // identity use in its own context
            break;
          }
          // otherwise the variable is used as a function over its context
          ty = ctx_to_pis(u.cx, u.head);
          break;
        }
        if (s.entries.size() != u.cx.decls.size())
          throw Diag("substitution arity mismatch on '" + t->head.name + "'");
        Subst checked;
        checked.wk = s.wk;
        for (size_t i = 0; i < s.entries.size(); i++) {
          Subst prefix;
          prefix.entries = checked.entries;
          TypePtr want = u.cx.decls[i].type;
          if (!prefix.entries.empty() || has_free_bvar(want))
            want = apply_subst_type(prefix, want);
          ucheck(env, cx, s.entries[i], want);
          checked.entries.push_back(s.entries[i]);
        }
        ty = s.is_empty() ? u.head : apply_subst_type(s, u.head);
        break;
      }
    }
    for (auto& arg : t->spine) {
      TypePtr z = zonk_type(ty, look());
      if (!z->is_pi) throw Diag("term applied to too many arguments");
      ucheck(env, cx, arg, z->dom);
      ty = subst_top_type(z->cod, arg);
    }
    return zonk_type(ty, look());
  }

  static TypePtr ctx_to_pis(const LFCtx& cx, TypePtr head) {
    for (int i = (int)cx.decls.size() - 1; i >= 0; i--)
      head = mk_pi(cx.decls[i].param, cx.decls[i].type, head, cx.decls[i].name);
    return head;
  }

  static std::vector<std::string> names(const LFCtx& cx) {
    std::vector<std::string> v;
    for (auto& d : cx.decls) v.push_back(d.name);
    return v;
  }

  // ---------------------------------------------------------- expressions

  CTypePtr infer_expr(Env& env, const CExprPtr& e) {
    switch (e->kind) {
      case CompExpr::Var: {
        auto it = env.gamma.find(e->name);
        if (it == env.gamma.end())
          throw Diag("unbound variable '" + e->name + "'");
        return zonk_ctype(it->second, look());
      }
      case CompExpr::ConstRef: {
        if (auto* t = sig_.theorem(e->name)) return t->type;
        if (auto* c = sig_.comp_const(e->name)) return c->type;
        throw Diag("undeclared name '" + e->name + "'");
      }
      case CompExpr::BoxI: {
        if (e->term->is_lam())
          throw Diag("boxed terms must have atomic type");
        TypePtr p = uinfer(env, e->cx, zonk_term(e->term, look()));
        if (p->is_pi) throw Diag("boxed terms must have atomic type");
        return mk_ctbox(e->cx, p);
      }
      case CompExpr::App: {
        CTypePtr f = infer_expr(env, e->e1);
        f = zonk_ctype(f, look());
        if (f->kind == CompType::Arrow) {
          check_expr(env, e->e2, f->left);
          return f->right;
        }
        if (f->kind == CompType::PiBox && e->e2->kind == CompExpr::BoxI)
          return apply_pibox(env, f, mk_contextual(e->e2->cx, e->e2->term));
        throw Diag("application of a non-function");
      }
      case CompExpr::MApp: {
        CTypePtr f = infer_expr(env, e->e1);
        f = zonk_ctype(f, look());
        if (f->kind == CompType::PiBox)
          return apply_pibox(env, f, e->carg);
        if (f->kind == CompType::Arrow && e->carg.kind == MetaTerm::Contextual) {
          // boxed argument in ordinary argument position
          if (f->left->kind != CompType::Box)
            throw Diag("boxed argument against non-boxed hypothesis");
          check_metaterm(env, e->carg, mk_boxed(f->left->cx, f->left->head));
          return f->right;
        }
        throw Diag("contextual application of a non-quantified type");
      }
      default:
        throw Diag("cannot infer a type for this expression");
    }
  }

  CTypePtr apply_pibox(Env& env, const CTypePtr& f, const MetaTerm& arg) {
    check_metaterm(env, arg, f->u);
    MetaSubst th;
    th[f->name] = zonk_metaterm(arg, look());
    return apply_msubst(th, f->body);
  }

  void check_expr(Env& env, const CExprPtr& e, CTypePtr expected) {
    expected = zonk_ctype(expected, look());
    switch (e->kind) {
      case CompExpr::Hole:
        holes.emplace_back(e->name, expected);
        return;
      case CompExpr::Fn: {
        if (expected->kind != CompType::Arrow)
          throw Diag("fn against a non-function type");
        Env e2 = env;
        e2.gamma[e->name] = expected->left;
        if (ind_pending_ == 0 && expected->left->kind == CompType::Box) {
          e2.comp_roots.insert(e->name);
          ind_pending_ = -2;
        } else if (ind_pending_ > 0) {
          ind_pending_--;
        }
        check_expr(e2, e->e1, expected->right);
        return;
      }
      case CompExpr::MLam: {
        if (expected->kind != CompType::PiBox)
          throw Diag("mlam against a non-quantified type");
        Env e2 = env;
        e2.metas[e->name] = expected->u;
        e2.universal.insert(e->name);
        CTypePtr body = expected->body;
        if (expected->name != e->name) {
          MetaSubst ren;
          ren[expected->name] = meta_id_occurrence(e->name, expected->u);
          body = apply_msubst(ren, body);
        }
        if (!expected->implicit) {
          if (ind_pending_ == 0) {
            e2.meta_roots.insert(e->name);
            ind_pending_ = -2;
          } else if (ind_pending_ > 0) {
            ind_pending_--;
          }
        }
        check_expr(e2, e->e1, body);
        return;
      }
      case CompExpr::LetBox: {
        maybe_check_recursive_call(env, e->e1);
        CTypePtr s = zonk_ctype(infer_expr(env, e->e1), look());
        if (s->kind != CompType::Box)
          throw Diag("let [ |- ...] on a non-boxed expression");
        Env e2 = env;
        e2.metas[e->name] = mk_boxed(s->cx, s->head);
        e2.universal.insert(e->name);
        if (is_root_expr(env, e->e1)) e2.meta_roots.insert(e->name);
        if (is_sub_expr(env, e->e1)) e2.meta_sub.insert(e->name);
        check_expr(e2, e->e2, expected);
        return;
      }
      case CompExpr::CaseMeta:
        // `impossible e` parses as a zero-branch case; dispatch on the
        // scrutinee's type
        if (e->mbranches.empty() && e->cbranches.empty() &&
            zonk_ctype(infer_expr(env, e->scrut), look())->kind ==
                CompType::Atomic) {
          check_case_comp(env, e, expected);
          return;
        }
        check_case_meta(env, e, expected);
        return;
      case CompExpr::CaseComp:
        check_case_comp(env, e, expected);
        return;
      default: {
        maybe_check_recursive_call(env, e);
        CTypePtr got = infer_expr(env, e);
        Unifier un(sig_, store_, env.metas, rigid_universals(env));
        if (un.ctype(got, expected) != UnifyResult::Solved)
          throw Diag("expression has type " +
                     Printer(&sig_).ctype(zonk_ctype(got, look())) +
                     " but " +
                     Printer(&sig_).ctype(zonk_ctype(expected, look())) +
                     " was expected");
        return;
      }
    }
  }

  // ------------------------------------------------------------- splitting

  // Instantiated constructor: canonical pattern spine and variable types.
  struct CtorInst {
    std::vector<TermPtr> spine;
    std::vector<std::pair<std::string, MetaType>> vars;
    TypePtr result;
  };

  CtorInst instantiate_ctor(const LFConst& c,
                            const std::vector<std::string>& names) {
    CtorInst out;
    TypePtr ty = c.type;
    int i = 0;
    Subst built;  // maps the constructor's Pi binders to the fresh mvars
    for (; ty->is_pi; i++) {
      TypePtr dom = apply_front(built, ty->dom);
      std::string n = i < (int)names.size() ? names[i]
                                            : "!" + std::to_string(++ins_);
      if (dom->is_pi) {
        LFCtx ucx;
        TypePtr core = dom;
        while (core->is_pi) {
          ucx.decls.push_back(CtxDecl{core->binder_hint, core->dom,
                                      core->param});
          core = core->cod;
        }
        out.vars.emplace_back(n, mk_boxed(ucx, core));
        TermPtr occ = eta_closure_n(n, (int)ucx.decls.size());
        out.spine.push_back(occ);
        built.entries.push_back(occ);
      } else {
        out.vars.emplace_back(n, mk_boxed(LFCtx{}, dom));
        out.spine.push_back(mk_mvar(n));
        built.entries.push_back(mk_mvar(n));
      }
      ty = ty->cod;
    }
    out.result = apply_front(built, ty);
    return out;
  }

  // Applies a closed-image substitution for the leading binders of a
  // constructor type: binder j (0-based) maps to built.entries[j].
  static TypePtr apply_front(const Subst& built, const TypePtr& a) {
    if (built.entries.empty()) return a;
    return apply_subst_type(built, a);
  }
  static TermPtr eta_closure_n(const std::string& u, int k) {
    Subst s;
    for (int i = k - 1; i >= 0; i--) s.entries.push_back(mk_bvar(i));
    TermPtr t = mk_mvar(u, std::move(s));
    for (int i = 0; i < k; i++) t = mk_lam(t);
    return t;
  }

  void check_case_meta(Env& env, const CExprPtr& e, const CTypePtr& expected) {
    maybe_check_recursive_call(env, e->scrut);
    CTypePtr s = zonk_ctype(infer_expr(env, e->scrut), look());
    if (s->kind != CompType::Box)
      throw Diag("case on a non-boxed expression");
    if (s->cx.var || !s->cx.decls.empty())
      throw Diag("case splitting is only supported in the empty context");
    TypePtr p = zonk_type(s->head, look());
    const LFFamily* fam = sig_.family(p->family);
    if (!fam) throw Diag("cannot split on type " + Printer(&sig_).type(p));

    bool from_root = is_root_expr(env, e->scrut) || is_sub_expr(env, e->scrut);

    // the scrutinee term itself, when it is in evidence: matching a branch
    // then refines the meta-variables it mentions
    TermPtr scrut_tm;
    if (e->scrut->kind == CompExpr::BoxI)
      scrut_tm = zonk_term(e->scrut->term, look());

    // which constructors can produce this type (and, if known, this term)?
    std::set<std::string> required;
    for (auto& cn : fam->ctors) {
      const LFConst* c = sig_.lf_const(cn);
      size_t m = store_.mark();
      CtorInst inst = instantiate_ctor(*c, {});
      Env probe = env;
      for (auto& [n, t] : inst.vars) probe.metas[n] = t;
      Unifier un(sig_, store_, probe.metas, all_flex);
      UnifyResult r = un.type(LFCtx{}, inst.result, p);
      if (r != UnifyResult::Fail && scrut_tm)
        r = worst(r, un.term(LFCtx{}, mk_const(cn, inst.spine), scrut_tm));
      store_.undo_to(m);
      if (r != UnifyResult::Fail) required.insert(cn);
    }
    std::set<std::string> covered;
    for (auto& br : e->mbranches) {
      if (br.pat->is_lam() || br.pat->head.kind != Head::Const)
        throw Diag("pattern must be a constructor application");
      const std::string& cn = br.pat->head.name;
      const LFConst* c = sig_.lf_const(cn);
      if (!c) throw Diag("unknown constructor '" + cn + "' in pattern");
      if (c->family != p->family)
        throw Diag("pattern constructor " + cn + " belongs to another family");
      if (covered.count(cn)) throw Diag("duplicate branch for " + cn);
      covered.insert(cn);
      if (!required.count(cn))
        throw Diag("branch for " + cn + " is unreachable");
      // branch: refine indices, then check the body
      std::vector<std::string> pv;
      for (auto& [n, t] : br.pat_vars) pv.push_back(n);
      if ((int)pv.size() != pi_arity(c->type))
        throw Diag("pattern for " + cn + " binds the wrong number of variables");
      size_t m = store_.mark();
      CtorInst inst = instantiate_ctor(*c, pv);
      Env e2 = env;
      for (auto& [n, t] : inst.vars) {
        e2.metas[n] = t;
        e2.universal.insert(n);
      }
      Unifier un(sig_, store_, e2.metas, all_flex);
      UnifyResult ur = un.type(LFCtx{}, inst.result, p);
      if (ur != UnifyResult::Fail && scrut_tm)
        ur = worst(ur, un.term(LFCtx{}, mk_const(cn, inst.spine), scrut_tm));
      if (ur == UnifyResult::Fail)
        throw Diag("pattern for " + cn + " does not match the scrutinee");
      if (from_root) {
        for (auto& [n, t] : inst.vars) {
          MetaType z = zonk_metatype(t, look());
          if (z.kind == MetaType::Box && !z.head->is_pi &&
              z.head->family == ind_family_)
            e2.meta_sub.insert(n);
        }
      }
      check_expr(e2, br.body, expected);
      store_.undo_to(m);
    }
    for (auto& cn : required)
      if (!covered.count(cn))
        throw Diag("missing branch for constructor " + cn);
    if (e->ascription) {
      Unifier un(sig_, store_, env.metas, rigid_universals(env));
      if (un.ctype(e->ascription, s) == UnifyResult::Fail)
        throw Diag("pattern ascription does not match the scrutinee type");
    }
  }

  static int pi_arity(TypePtr t) {
    int n = 0;
    while (t->is_pi) {
      n++;
      t = t->cod;
    }
    return n;
  }

  void check_case_comp(Env& env, const CExprPtr& e, const CTypePtr& expected) {
    maybe_check_recursive_call(env, e->scrut);
    CTypePtr s = zonk_ctype(infer_expr(env, e->scrut), look());
    if (s->kind != CompType::Atomic)
      throw Diag("case on a non-inductive computation type");
    const CompTypeDecl* d = sig_.ctype(s->name);
    if (!d) throw Diag("undeclared computation type '" + s->name + "'");

    std::set<std::string> required, covered;
    for (auto& cn : d->ctors) {
      size_t m = store_.mark();
      Env probe = env;
      CTypePtr r = instantiate_cctor(probe, *sig_.comp_const(cn), {}, nullptr);
      Unifier un(sig_, store_, probe.metas, all_flex);
      UnifyResult res = un.ctype(r, s);
      store_.undo_to(m);
      if (res != UnifyResult::Fail) required.insert(cn);
    }
    for (auto& br : e->cbranches) {
      const CompConst* c = sig_.comp_const(br.ctor);
      if (!c) throw Diag("unknown constructor '" + br.ctor + "' in pattern");
      if (c->target != s->name)
        throw Diag("pattern constructor " + br.ctor + " has the wrong type");
      if (covered.count(br.ctor)) throw Diag("duplicate branch for " + br.ctor);
      covered.insert(br.ctor);
      if (!required.count(br.ctor))
        throw Diag("branch for " + br.ctor + " is unreachable");
      size_t m = store_.mark();
      Env e2 = env;
      CTypePtr r = instantiate_cctor(e2, *c, br.args, &br);
      Unifier un(sig_, store_, e2.metas, all_flex);
      if (un.ctype(r, s) == UnifyResult::Fail)
        throw Diag("pattern for " + br.ctor + " does not match the scrutinee");
      check_expr(e2, br.body, expected);
      store_.undo_to(m);
    }
    for (auto& cn : required)
      if (!covered.count(cn))
        throw Diag("missing branch for constructor " + cn);
  }

  // Binds a computation constructor's arguments into env (explicit names from
  // the branch, fresh names for implicits) and returns its result type.
  CTypePtr instantiate_cctor(Env& env, const CompConst& c,
                             const std::vector<std::string>& args,
                             const CompBranch* br) {
    CTypePtr t = c.type;
    size_t ai = 0;
    MetaSubst ren;
    while (true) {
      t = zonk_ctype(apply_msubst(ren, t), look());
      ren.clear();
      if (t->kind == CompType::PiBox) {
        std::string n;
        if (t->implicit || ai >= args.size())
          n = "!" + std::to_string(++ins_);
        else
          n = args[ai++];
        MetaType u = t->u;
        env.metas[n] = u;
        if (br) env.universal.insert(n);
        if (t->name != n) ren[t->name] = meta_id_occurrence(n, u);
        t = t->body;
        continue;
      }
      if (t->kind == CompType::Arrow) {
        if (ai < args.size()) {
          env.gamma[args[ai]] = t->left;
          ai++;
        } else if (br) {
          throw Diag("pattern for " + c.name + " binds too few variables");
        }
        t = t->right;
        continue;
      }
      break;
    }
    if (br && ai != args.size())
      throw Diag("pattern for " + c.name + " binds too many variables");
    return t;
  }

  // -------------------------------------------------------------- totality

  void setup_induction(const ProofScript& ps, Env& env) {
    ind_family_ = family_of_explicit_arg(ps.type, *ps.totality);
    // locate the induction argument among the intros
    CTypePtr t = ps.type;
    int k = *ps.totality;
    size_t di = 0, gi = 0;
    while (true) {
      if (t->kind == CompType::PiBox) {
        if (!t->implicit && --k == 0) {
          env.meta_roots.insert(ps.delta[di].name);
          return;
        }
        di++;
        t = t->body;
        continue;
      }
      if (t->kind == CompType::Arrow) {
        if (--k == 0) {
          env.comp_roots.insert(ps.gamma[gi].first);
          return;
        }
        gi++;
        t = t->right;
        continue;
      }
      throw Diag("totality index out of range");
    }
  }

  std::string family_of_explicit_arg(CTypePtr t, int k) const {
    while (true) {
      if (t->kind == CompType::PiBox) {
        if (!t->implicit && --k == 0) {
          if (t->u.kind != MetaType::Box)
            throw Diag("totality must be measured on a boxed argument");
          return t->u.head->family;
        }
        t = t->body;
        continue;
      }
      if (t->kind == CompType::Arrow) {
        if (--k == 0) {
          if (t->left->kind != CompType::Box)
            throw Diag("totality must be measured on a boxed argument");
          return t->left->head->family;
        }
        t = t->right;
        continue;
      }
      throw Diag("totality index out of range");
    }
  }

  // Position of the k-th explicit argument among the binders crossed by a
  // rec body's fn/mlam prefix (explicit binders only).
  static int explicit_position(CTypePtr t, int k) {
    int pos = 0;
    while (true) {
      if (t->kind == CompType::PiBox) {
        if (!t->implicit) {
          if (--k == 0) return pos;
          pos++;
        }
        t = t->body;
        continue;
      }
      if (t->kind == CompType::Arrow) {
        if (--k == 0) return pos;
        pos++;
        t = t->right;
        continue;
      }
      return -1;
    }
  }

  bool is_root_expr(const Env& env, const CExprPtr& e) const {
    if (e->kind == CompExpr::Var) return env.comp_roots.count(e->name) != 0;
    if (e->kind == CompExpr::BoxI && !e->term->is_lam() &&
        e->term->head.kind == Head::MVar && e->term->spine.empty())
      return env.meta_roots.count(e->term->head.name) != 0;
    return false;
  }
  bool is_sub_expr(const Env& env, const CExprPtr& e) const {
    if (e->kind == CompExpr::BoxI && !e->term->is_lam() &&
        e->term->head.kind == Head::MVar && e->term->spine.empty())
      return env.meta_sub.count(e->term->head.name) != 0;
    return false;
  }

  // A recursive occurrence must pass a strict subterm of the induction
  // argument at the declared position.
  void maybe_check_recursive_call(const Env& env, const CExprPtr& e) {
    if (!self_total_) return;
    // walk down the application spine
    std::vector<const CompExpr*> chain;
    const CompExpr* cur = e.get();
    while (cur->kind == CompExpr::App || cur->kind == CompExpr::MApp) {
      chain.push_back(cur);
      cur = cur->e1.get();
    }
    if (cur->kind != CompExpr::ConstRef || cur->name != self_) return;
    // chain is outermost-first; reverse to argument order
    std::vector<const CompExpr*> args(chain.rbegin(), chain.rend());
    // count explicit positions against the theorem type
    const TheoremDecl* th = sig_.theorem(self_);
    CTypePtr t = th ? th->type : nullptr;
    if (!t) return;
    int k = *self_total_;
    size_t ai = 0;
    while (t && ai < args.size()) {
      bool implicit_pi =
          t->kind == CompType::PiBox && t->implicit;
      if (t->kind == CompType::PiBox) {
        if (!implicit_pi && --k == 0) break;
        t = t->body;
      } else if (t->kind == CompType::Arrow) {
        if (--k == 0) break;
        t = t->right;
      } else {
        return;
      }
      ai++;
    }
    if (k != 0 || ai >= args.size())
      throw Diag("recursive call does not supply the induction argument");
    const CompExpr* a = args[ai];
    const CompExpr* arg =
        a->kind == CompExpr::MApp ? nullptr : a->e2.get();
    TermPtr tm;
    if (a->kind == CompExpr::MApp && a->carg.kind == MetaTerm::Contextual)
      tm = a->carg.term;
    else if (arg && arg->kind == CompExpr::BoxI)
      tm = arg->term;
    if (!tm || tm->is_lam() || tm->head.kind != Head::MVar ||
        !tm->spine.empty() || !env.meta_sub.count(tm->head.name))
      throw Diag(
          "recursive call is not on a strict subterm of the induction "
          "argument");
  }
};

inline void check_proof(const Signature& sig, const ProofScript& ps,
                        CheckOptions opt = {}) {
  ProofChecker c(sig, opt);
  c.check_script(ps);
}

}  // namespace blf
