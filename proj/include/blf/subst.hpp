#pragma once

// Hereditary substitution and friends. All operations preserve canonical
// (beta-normal) form: redexes created by a replacement are contracted on the
// fly. Bound variables are de Bruijn indices; meta-variable instantiation is
// resolved through a MetaStore (trail-backed, so search can undo bindings).

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "blf/ast.hpp"

namespace blf {

// ------------------------------------------------------------- MetaStore

class MetaStore {
 public:
  size_t mark() const { return trail_.size(); }
  void undo_to(size_t m) {
    while (trail_.size() > m) {
      bind_.erase(trail_.back());
      trail_.pop_back();
    }
  }
  void set(const std::string& u, MetaTerm c) {
    bind_[u] = std::move(c);
    trail_.push_back(u);
  }
  const MetaTerm* get(const std::string& u) const {
    auto it = bind_.find(u);
    return it == bind_.end() ? nullptr : &it->second;
  }
  bool bound(const std::string& u) const { return bind_.count(u) != 0; }
  // names bound since a mark, in binding order (for scope audits)
  const std::string& trail_at(size_t i) const { return trail_[i]; }

 private:
  std::map<std::string, MetaTerm> bind_;
  std::vector<std::string> trail_;
};

// ------------------------------------------------------------- shifting

TermPtr shift_term(const TermPtr& t, int d, int cutoff = 0);
TypePtr shift_type(const TypePtr& a, int d, int cutoff = 0);

inline Subst shift_subst(const Subst& s, int d, int cutoff = 0) {
  Subst r;
  r.wk = s.wk;
  for (auto& e : s.entries) r.entries.push_back(shift_term(e, d, cutoff));
  return r;
}

inline TermPtr shift_term(const TermPtr& t, int d, int cutoff) {
  if (t->is_lam()) return mk_lam(shift_term(t->lam_body, d, cutoff + 1), t->binder_hint);
  Head h = t->head;
  if (h.kind == Head::BVar && h.index >= cutoff) h.index += d;
  if (h.kind == Head::MVar) h.sub = shift_subst(h.sub, d, cutoff);
  std::vector<TermPtr> sp;
  sp.reserve(t->spine.size());
  for (auto& a : t->spine) sp.push_back(shift_term(a, d, cutoff));
  return mk_neutral(std::move(h), std::move(sp));
}

inline TypePtr shift_type(const TypePtr& a, int d, int cutoff) {
  if (a->is_pi)
    return mk_pi(a->param, shift_type(a->dom, d, cutoff),
                 shift_type(a->cod, d, cutoff + 1), a->binder_hint);
  std::vector<TermPtr> args;
  args.reserve(a->args.size());
  for (auto& m : a->args) args.push_back(shift_term(m, d, cutoff));
  return mk_atom(a->family, std::move(args));
}

// --------------------------------------------- hereditary substitution

TermPtr subst_top_term(const TermPtr& body, const TermPtr& arg);

// Apply a spine to a (possibly Lam) head, contracting redexes.
inline TermPtr apply_spine(TermPtr head, const std::vector<TermPtr>& args,
                           size_t from = 0) {
  TermPtr cur = head;
  size_t i = from;
  while (i < args.size() && cur->is_lam()) {
    cur = subst_top_term(cur->lam_body, args[i]);
    i++;
  }
  if (i == args.size()) return cur;
  if (cur->is_lam()) throw Diag("internal: over-application of a lambda");
  std::vector<TermPtr> sp = cur->spine;
  for (; i < args.size(); i++) sp.push_back(args[i]);
  return mk_neutral(cur->head, std::move(sp));
}

namespace detail {
// Substitute `arg` (well-scoped at depth `depth`) for BVar `depth` in t,
// lowering indices above it.
inline TermPtr subst_var(const TermPtr& t, const TermPtr& arg, int depth) {
  if (t->is_lam())
    return mk_lam(subst_var(t->lam_body, arg, depth + 1), t->binder_hint);
  std::vector<TermPtr> sp;
  sp.reserve(t->spine.size());
  for (auto& a : t->spine) sp.push_back(subst_var(a, arg, depth));
  const Head& h = t->head;
  if (h.kind == Head::BVar) {
    if (h.index == depth) {
      TermPtr rep = shift_term(arg, depth, 0);
      return apply_spine(rep, sp);  // hereditary: contract any new redexes
    }
    Head nh = h;
    if (nh.index > depth) nh.index -= 1;
    return mk_neutral(std::move(nh), std::move(sp));
  }
  Head nh = h;
  if (nh.kind == Head::MVar) {
    Subst ns;
    ns.wk = nh.sub.wk;
    for (auto& e : nh.sub.entries) ns.entries.push_back(subst_var(e, arg, depth));
    nh.sub = std::move(ns);
  }
  return mk_neutral(std::move(nh), std::move(sp));
}
}  // namespace detail

inline TermPtr subst_top_term(const TermPtr& body, const TermPtr& arg) {
  return detail::subst_var(body, arg, 0);
}
inline TypePtr subst_top_type(const TypePtr& a, const TermPtr& arg, int depth = 0) {
  if (a->is_pi)
    return mk_pi(a->param, subst_top_type(a->dom, arg, depth),
                 subst_top_type(a->cod, arg, depth + 1), a->binder_hint);
  std::vector<TermPtr> args;
  for (auto& m : a->args) args.push_back(detail::subst_var(m, arg, depth));
  return mk_atom(a->family, std::move(args));
}

// The spec-level hsubst: single-variable hereditary substitution. The
// replacement is scoped in the context without the substituted variable;
// indices above it are lowered. The classifying type is kept only as a
// recursion-measure witness.
inline TermPtr hsubst(const TermPtr& subject, int var_index,
                      const TermPtr& replacement, const TypePtr& /*at_type*/) {
  return detail::subst_var(subject, replacement, var_index);
}

// ------------------------------------------- simultaneous substitution

// sigma : Phi -> Psi. Entry i corresponds to declaration i of Phi (0 = first
// declared). In the subject, BVar j (under `crossed` binders) refers to
// declaration (n-1-(j-crossed)).
inline TermPtr apply_subst_term(const Subst& s, const TermPtr& t, int crossed = 0);
inline Subst compose_subst_at(const Subst& outer, const Subst& inner, int crossed);

inline Subst compose_subst(const Subst& outer, const Subst& inner) {
  Subst r;
  r.wk = inner.wk;
  for (auto& e : inner.entries) r.entries.push_back(apply_subst_term(outer, e));
  return r;
}

inline TermPtr apply_subst_term(const Subst& s, const TermPtr& t, int crossed) {
  if (t->is_lam())
    return mk_lam(apply_subst_term(s, t->lam_body, crossed + 1), t->binder_hint);
  std::vector<TermPtr> sp;
  sp.reserve(t->spine.size());
  for (auto& a : t->spine) sp.push_back(apply_subst_term(s, a, crossed));
  const Head& h = t->head;
  if (h.kind == Head::BVar) {
    if (h.index < crossed) return mk_neutral(h, std::move(sp));
    int j = h.index - crossed;
    int n = (int)s.entries.size();
    if (j < n) {
      TermPtr rep = shift_term(s.entries[n - 1 - j], crossed, 0);
      return apply_spine(rep, sp);
    }
    if (s.wk) {
      // variable from the abstract (context-variable) part: untouched
      return mk_neutral(h, std::move(sp));
    }
    throw Diag("internal: substitution arity mismatch");
  }
  Head nh = h;
  if (nh.kind == Head::MVar) nh.sub = compose_subst_at(s, nh.sub, crossed);
  return mk_neutral(std::move(nh), std::move(sp));
}

inline Subst compose_subst_at(const Subst& outer, const Subst& inner, int crossed) {
  Subst r;
  r.wk = inner.wk;
  for (auto& e : inner.entries) r.entries.push_back(apply_subst_term(outer, e, crossed));
  return r;
}

inline TypePtr apply_subst_type(const Subst& s, const TypePtr& a, int crossed = 0) {
  if (a->is_pi)
    return mk_pi(a->param, apply_subst_type(s, a->dom, crossed),
                 apply_subst_type(s, a->cod, crossed + 1), a->binder_hint);
  std::vector<TermPtr> args;
  for (auto& m : a->args) args.push_back(apply_subst_term(s, m, crossed));
  return mk_atom(a->family, std::move(args));
}

// ---------------------------------------------------- meta substitution

// Zonking resolves meta-variables through a lookup function; the same
// traversal implements [[theta]] for explicit meta-substitutions.
using MetaLookup = std::function<const MetaTerm*(const std::string&)>;

inline MetaLookup store_lookup(const MetaStore& st) {
  return [&st](const std::string& u) { return st.get(u); };
}
inline MetaLookup map_lookup(const MetaSubst& th) {
  return [&th](const std::string& u) -> const MetaTerm* {
    auto it = th.find(u);
    return it == th.end() ? nullptr : &it->second;
  };
}

// `rec` re-resolves inside instantiation images (solver bindings chain);
// simultaneous meta-substitution passes false so shadowed names in an image
// are left alone.
inline TermPtr zonk_term(const TermPtr& t, const MetaLookup& look,
                         bool rec = true) {
  if (t->is_lam())
    return mk_lam(zonk_term(t->lam_body, look, rec), t->binder_hint);
  std::vector<TermPtr> sp;
  for (auto& a : t->spine) sp.push_back(zonk_term(a, look, rec));
  const Head& h = t->head;
  if (h.kind == Head::MVar) {
    Subst s;
    s.wk = h.sub.wk;
    for (auto& e : h.sub.entries) s.entries.push_back(zonk_term(e, look, rec));
    if (const MetaTerm* c = look(h.name)) {
      if (c->kind != MetaTerm::Contextual)
        throw Diag("internal: context instantiation in term position");
      TermPtr body = rec ? zonk_term(c->term, look, rec) : c->term;
      // eagerly apply the postponed substitution
      TermPtr inst = apply_subst_term(s, body);
      return apply_spine(inst, sp);
    }
    Head nh = h;
    nh.sub = std::move(s);
    return mk_neutral(std::move(nh), std::move(sp));
  }
  return mk_neutral(h, std::move(sp));
}

inline TypePtr zonk_type(const TypePtr& a, const MetaLookup& look,
                         bool rec = true) {
  if (a->is_pi)
    return mk_pi(a->param, zonk_type(a->dom, look, rec),
                 zonk_type(a->cod, look, rec), a->binder_hint);
  std::vector<TermPtr> args;
  for (auto& m : a->args) args.push_back(zonk_term(m, look, rec));
  return mk_atom(a->family, std::move(args));
}

inline LFCtx zonk_ctx(const LFCtx& cx, const MetaLookup& look,
                      bool rec = true) {
  LFCtx r;
  r.var = cx.var;
  for (auto& d : cx.decls)
    r.decls.push_back({d.name, zonk_type(d.type, look, rec), d.param});
  return r;
}

inline MetaType zonk_metatype(const MetaType& u, const MetaLookup& look,
                              bool rec = true) {
  if (u.kind == MetaType::Schema) return u;
  return mk_boxed(zonk_ctx(u.cx, look, rec), zonk_type(u.head, look, rec));
}

inline MetaTerm zonk_metaterm(const MetaTerm& c, const MetaLookup& look,
                              bool rec = true) {
  if (c.kind == MetaTerm::Ctx) return c;
  return mk_contextual(zonk_ctx(c.cx, look, rec), zonk_term(c.term, look, rec));
}

inline CTypePtr zonk_ctype(const CTypePtr& t, const MetaLookup& look,
                           bool rec = true) {
  switch (t->kind) {
    case CompType::Box:
      return mk_ctbox(zonk_ctx(t->cx, look, rec), zonk_type(t->head, look, rec));
    case CompType::Arrow:
      return mk_ctarrow(zonk_ctype(t->left, look, rec),
                        zonk_ctype(t->right, look, rec));
    case CompType::PiBox: {
      // the binder shadows any instantiation of the same name
      std::string bound = t->name;
      MetaLookup inner = [bound, &look](const std::string& u) {
        return u == bound ? nullptr : look(u);
      };
      return mk_ctpibox(t->name, zonk_metatype(t->u, look, rec),
                        zonk_ctype(t->body, inner, rec), t->implicit);
    }
    case CompType::Atomic: {
      std::vector<MetaTerm> args;
      for (auto& a : t->args) args.push_back(zonk_metaterm(a, look, rec));
      return mk_ctatomic(t->name, std::move(args));
    }
  }
  throw Diag("internal: bad comp type");
}

inline MetaLookup mask_lookup(std::vector<std::string> bound,
                              const MetaLookup& look) {
  return [bound = std::move(bound), &look](const std::string& u)
             -> const MetaTerm* {
    for (auto& b : bound)
      if (b == u) return nullptr;
    return look(u);
  };
}

CExprPtr zonk_cexpr(const CExprPtr& e, const MetaLookup& look);
inline CExprPtr zonk_cexpr(const CExprPtr& e, const MetaLookup& look) {
  auto n = std::make_shared<CompExpr>(*e);
  if (e->term) n->term = zonk_term(e->term, look);
  n->cx = zonk_ctx(e->cx, look);
  if (e->e1) n->e1 = zonk_cexpr(e->e1, look);
  // mlam/let bind a meta name in their body
  MetaLookup body_look =
      (e->kind == CompExpr::MLam || e->kind == CompExpr::LetBox)
          ? mask_lookup({e->name}, look)
          : look;
  if (e->e2) n->e2 = zonk_cexpr(e->e2, body_look);
  if (e->kind == CompExpr::MLam && n->e1) n->e1 = zonk_cexpr(e->e1, body_look);
  if (e->kind == CompExpr::MApp) n->carg = zonk_metaterm(e->carg, look);
  if (e->scrut) n->scrut = zonk_cexpr(e->scrut, look);
  n->mbranches.clear();
  for (auto& b : e->mbranches) {
    MetaBranch nb;
    std::vector<std::string> pvs;
    for (auto& pv : b.pat_vars) pvs.push_back(pv.first);
    MetaLookup bl = mask_lookup(std::move(pvs), look);
    nb.pat = zonk_term(b.pat, bl);
    for (auto& pv : b.pat_vars)
      nb.pat_vars.emplace_back(pv.first, zonk_metatype(pv.second, bl));
    nb.body = zonk_cexpr(b.body, bl);
    n->mbranches.push_back(std::move(nb));
  }
  n->cbranches.clear();
  for (auto& b : e->cbranches) {
    CompBranch nb;
    nb.ctor = b.ctor;
    nb.args = b.args;
    nb.body = zonk_cexpr(b.body, look);
    n->cbranches.push_back(std::move(nb));
  }
  if (e->ascription) n->ascription = zonk_ctype(e->ascription, look);
  return n;
}

// apply_msubst entry points (the spec names): theta over any object kind.
inline TermPtr apply_msubst(const MetaSubst& th, const TermPtr& t) {
  return zonk_term(t, map_lookup(th), /*rec=*/false);
}
inline TypePtr apply_msubst(const MetaSubst& th, const TypePtr& a) {
  return zonk_type(a, map_lookup(th), /*rec=*/false);
}
inline CTypePtr apply_msubst(const MetaSubst& th, const CTypePtr& t) {
  return zonk_ctype(t, map_lookup(th), /*rec=*/false);
}
inline MetaType apply_msubst(const MetaSubst& th, const MetaType& u) {
  return zonk_metatype(u, map_lookup(th), /*rec=*/false);
}

// Apply theta to a meta context: substituted entries are removed.
inline MetaCtx apply_msubst_ctx(const MetaSubst& th, const MetaCtx& d) {
  MetaCtx r;
  for (auto& e : d) {
    if (th.count(e.name)) continue;
    r.push_back({e.name, apply_msubst(th, e.type), e.universal});
  }
  return r;
}

// ------------------------------------------------------------- equality

inline bool equal_subst(const Subst& a, const Subst& b);
inline bool equal_term(const TermPtr& a, const TermPtr& b) {
  if (a->is_lam() != b->is_lam()) return false;
  if (a->is_lam()) return equal_term(a->lam_body, b->lam_body);
  if (a->head.kind != b->head.kind) return false;
  switch (a->head.kind) {
    case Head::Const:
    case Head::MVar:
      if (a->head.name != b->head.name) return false;
      if (a->head.kind == Head::MVar && !equal_subst(a->head.sub, b->head.sub))
        return false;
      break;
    case Head::BVar:
      if (a->head.index != b->head.index) return false;
      break;
  }
  if (a->spine.size() != b->spine.size()) return false;
  for (size_t i = 0; i < a->spine.size(); i++)
    if (!equal_term(a->spine[i], b->spine[i])) return false;
  return true;
}
inline bool equal_subst(const Subst& a, const Subst& b) {
  if (a.wk != b.wk) return false;
  if (a.entries.size() != b.entries.size()) return false;
  for (size_t i = 0; i < a.entries.size(); i++)
    if (!equal_term(a.entries[i], b.entries[i])) return false;
  return true;
}
inline bool equal_type(const TypePtr& a, const TypePtr& b) {
  if (a->is_pi != b->is_pi) return false;
  if (a->is_pi)
    return a->param == b->param && equal_type(a->dom, b->dom) &&
           equal_type(a->cod, b->cod);
  if (a->family != b->family || a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); i++)
    if (!equal_term(a->args[i], b->args[i])) return false;
  return true;
}
inline bool equal_ctx(const LFCtx& a, const LFCtx& b) {
  if (a.var != b.var || a.decls.size() != b.decls.size()) return false;
  for (size_t i = 0; i < a.decls.size(); i++)
    if (a.decls[i].param != b.decls[i].param ||
        !equal_type(a.decls[i].type, b.decls[i].type))
      return false;
  return true;
}
inline bool equal_metaterm(const MetaTerm& a, const MetaTerm& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == MetaTerm::Ctx) return equal_ctx(a.ctxval, b.ctxval);
  return equal_term(a.term, b.term);
}
inline bool equal_metatype(const MetaType& a, const MetaType& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == MetaType::Schema) return a.schema == b.schema;
  return equal_ctx(a.cx, b.cx) && equal_type(a.head, b.head);
}
inline bool equal_ctype(const CTypePtr& a, const CTypePtr& b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case CompType::Box:
      return equal_ctx(a->cx, b->cx) && equal_type(a->head, b->head);
    case CompType::Arrow:
      return equal_ctype(a->left, b->left) && equal_ctype(a->right, b->right);
    case CompType::PiBox: {
      if (!equal_metatype(a->u, b->u)) return false;
      if (a->name == b->name) return equal_ctype(a->body, b->body);
      // alpha: rename b's binder to a's
      MetaSubst th;
      LFCtx cx;  // identity-ish rename via a fresh contextual var reference
      MetaTerm c;
      c.kind = MetaTerm::Contextual;
      c.cx = a->u.kind == MetaType::Box ? a->u.cx : LFCtx{};
      Subst id;
      for (int i = (int)c.cx.decls.size() - 1; i >= 0; i--)
        id.entries.push_back(mk_bvar((int)c.cx.decls.size() - 1 - i));
      c.term = mk_mvar(a->name, id);
      th[b->name] = c;
      return equal_ctype(a->body, apply_msubst(th, b->body));
    }
    case CompType::Atomic: {
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      for (size_t i = 0; i < a->args.size(); i++)
        if (!equal_metaterm(a->args[i], b->args[i])) return false;
      return true;
    }
  }
  return false;
}

// Identity substitution for a context with n concrete declarations
// (entry for declaration i is BVar n-1-i), plus the weakening head if any.
inline Subst id_subst(const LFCtx& cx) {
  Subst s;
  s.wk = cx.var;
  int n = (int)cx.decls.size();
  for (int i = 0; i < n; i++) s.entries.push_back(mk_bvar(n - 1 - i));
  return s;
}

}  // namespace blf
