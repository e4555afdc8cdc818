#pragma once

// Pattern unification for LF terms and types. Meta-variables are solved only
// when they occur as patterns (applied to a substitution of distinct bound
// variables); anything harder is reported Stuck and treated as failure by
// callers, never solved wrongly. Bindings go through a trail-backed store so
// callers can roll back on failure or backtracking.
//
// Binding is typed: when u is solved by a term R, the declared type of u is
// also unified with the type inferred for R. This is what lets inversion
// distinguish constructors whose result types differ only in their indices.

#include <functional>
#include <set>
#include <string>

#include "blf/ast.hpp"
#include "blf/subst.hpp"
#include "blf/typecheck.hpp"

namespace blf {

enum class UnifyResult { Solved, Fail, Stuck };

inline UnifyResult worst(UnifyResult a, UnifyResult b) {
  if (a == UnifyResult::Fail || b == UnifyResult::Fail) return UnifyResult::Fail;
  if (a == UnifyResult::Stuck || b == UnifyResult::Stuck)
    return UnifyResult::Stuck;
  return UnifyResult::Solved;
}

class Unifier {
 public:
  using IsFlex = std::function<bool(const std::string&)>;

  Unifier(const Signature& sig, MetaStore& store, const MetaTypeEnv& delta,
          IsFlex is_flex)
      : sig_(sig), store_(store), delta_(delta), is_flex_(std::move(is_flex)) {}

  UnifyResult term(const LFCtx& cx, const TermPtr& a, const TermPtr& b) {
    return un_term(cx, zonk_term(a, store_lookup(store_)),
                   zonk_term(b, store_lookup(store_)));
  }
  UnifyResult type(const LFCtx& cx, const TypePtr& a, const TypePtr& b) {
    return un_type(cx, zonk_type(a, store_lookup(store_)),
                   zonk_type(b, store_lookup(store_)));
  }
  UnifyResult metaterm(const MetaTerm& a, const MetaTerm& b) {
    if (a.kind != b.kind) return UnifyResult::Fail;
    if (a.kind == MetaTerm::Ctx)
      return equal_ctx(a.ctxval, b.ctxval) ? UnifyResult::Solved
                                           : UnifyResult::Fail;
    LFCtx ca = zonk_ctx(a.cx, store_lookup(store_));
    LFCtx cb = zonk_ctx(b.cx, store_lookup(store_));
    if (!equal_ctx(ca, cb)) return UnifyResult::Fail;
    return term(ca, a.term, b.term);
  }
  UnifyResult ctype(const CTypePtr& a, const CTypePtr& b) {
    if (a->kind != b->kind) return UnifyResult::Fail;
    switch (a->kind) {
      case CompType::Box: {
        LFCtx ca = zonk_ctx(a->cx, store_lookup(store_));
        LFCtx cb = zonk_ctx(b->cx, store_lookup(store_));
        if (!equal_ctx(ca, cb)) return UnifyResult::Fail;
        return type(ca, a->head, b->head);
      }
      case CompType::Arrow:
        return worst(ctype(a->left, b->left), ctype(a->right, b->right));
      case CompType::PiBox:
        // quantified computation types never need unification in this
        // fragment; require literal agreement
        return equal_ctype(a, b) ? UnifyResult::Solved : UnifyResult::Fail;
      case CompType::Atomic: {
        if (a->name != b->name || a->args.size() != b->args.size())
          return UnifyResult::Fail;
        UnifyResult r = UnifyResult::Solved;
        for (size_t i = 0; i < a->args.size(); i++)
          r = worst(r, metaterm(a->args[i], b->args[i]));
        return r;
      }
    }
    return UnifyResult::Fail;
  }

 private:
  const Signature& sig_;
  MetaStore& store_;
  const MetaTypeEnv& delta_;
  IsFlex is_flex_;

  bool flex(const Head& h) const {
    return h.kind == Head::MVar && !store_.bound(h.name) && is_flex_(h.name);
  }

  static TermPtr push_var(const TermPtr& t) {
    TermPtr s = shift_term(t, 1, 0);
    std::vector<TermPtr> sp = s->spine;
    sp.push_back(mk_bvar(0));
    return mk_neutral(s->head, std::move(sp));
  }

  static LFCtx extend_dummy(const LFCtx& cx) {
    LFCtx r = cx;
    r.decls.push_back(CtxDecl{"_", mk_atom("_"), false});
    return r;
  }

  UnifyResult un_term(const LFCtx& cx, const TermPtr& a, const TermPtr& b) {
    if (a->is_lam() || b->is_lam()) {
      TermPtr ba = a->is_lam() ? a->lam_body : push_var(a);
      TermPtr bb = b->is_lam() ? b->lam_body : push_var(b);
      return un_term(extend_dummy(cx), ba, bb);
    }
    bool fa = flex(a->head), fb = flex(b->head);
    if (fa && fb) return flex_flex(cx, a, b);
    if (fa) return flex_rigid(cx, a, b);
    if (fb) return flex_rigid(cx, b, a);
    // rigid-rigid
    if (a->head.kind != b->head.kind) return UnifyResult::Fail;
    switch (a->head.kind) {
      case Head::Const:
        if (a->head.name != b->head.name) return UnifyResult::Fail;
        break;
      case Head::BVar:
        if (a->head.index != b->head.index) return UnifyResult::Fail;
        break;
      case Head::MVar: {
        // rigid (universal) meta-variables: match like constants
        if (a->head.name != b->head.name) return UnifyResult::Fail;
        UnifyResult r = un_sub(cx, a->head.sub, b->head.sub);
        if (r != UnifyResult::Solved) return r;
        break;
      }
    }
    if (a->spine.size() != b->spine.size()) return UnifyResult::Fail;
    UnifyResult r = UnifyResult::Solved;
    for (size_t i = 0; i < a->spine.size(); i++) {
      r = worst(r, un_term(cx, a->spine[i], b->spine[i]));
      if (r == UnifyResult::Fail) return r;
    }
    return r;
  }

  UnifyResult un_sub(const LFCtx& cx, const Subst& a, const Subst& b) {
    if (a.wk != b.wk) return UnifyResult::Stuck;
    if (a.entries.size() != b.entries.size()) {
      if (a.is_empty() || b.is_empty()) {
        // identity against an explicit substitution: compare with identity
        const Subst& ex = a.is_empty() ? b : a;
        Subst id = id_subst(cx);
        if (id.entries.size() != ex.entries.size()) return UnifyResult::Stuck;
        UnifyResult r = UnifyResult::Solved;
        for (size_t i = 0; i < ex.entries.size(); i++)
          r = worst(r, un_term(cx, id.entries[i], ex.entries[i]));
        return r;
      }
      return UnifyResult::Stuck;
    }
    UnifyResult r = UnifyResult::Solved;
    for (size_t i = 0; i < a.entries.size(); i++)
      r = worst(r, un_term(cx, a.entries[i], b.entries[i]));
    return r;
  }

  // Pattern condition: substitution is a list of distinct bound variables and
  // the occurrence has an empty spine (lowering guarantees the latter for
  // well-formed goals).
  static bool pattern_check(const TermPtr& t, std::vector<int>& img) {
    if (!t->spine.empty()) return false;
    if (t->head.sub.wk) return false;
    img.clear();
    for (auto& e : t->head.sub.entries) {
      if (e->is_lam() || e->head.kind != Head::BVar || !e->spine.empty())
        return false;
      int ix = e->head.index;
      for (int seen : img)
        if (seen == ix) return false;
      img.push_back(ix);
    }
    return true;
  }

  // Rename t (over cx) into the meta-variable's own context: bound variable
  // img[i] becomes variable n-1-i. Out-of-image variables fail; occurrences
  // of u fail (occurs check); other flexible variables under a substitution
  // that does not invert cleanly are stuck.
  enum class InvSt { Ok, Fail, Stuck };
  TermPtr invert(const std::string& u, const std::vector<int>& img,
                 const TermPtr& t, int depth, InvSt& st) {
    if (st != InvSt::Ok) return nullptr;
    if (t->is_lam()) {
      TermPtr b = invert(u, img, t->lam_body, depth + 1, st);
      return st == InvSt::Ok ? mk_lam(b, t->binder_hint) : nullptr;
    }
    Head h = t->head;
    if (h.kind == Head::BVar) {
      if (h.index >= depth) {
        int src = h.index - depth;
        int tgt = -1;
        for (size_t i = 0; i < img.size(); i++)
          if (img[i] == src) tgt = (int)img.size() - 1 - (int)i;
        if (tgt < 0) {
          st = InvSt::Fail;
          return nullptr;
        }
        h.index = tgt + depth;
      }
    } else if (h.kind == Head::MVar) {
      if (h.name == u) {
        st = InvSt::Fail;  // occurs
        return nullptr;
      }
      if (h.sub.wk) {
        st = InvSt::Stuck;
        return nullptr;
      }
      Subst ns;
      for (auto& e : h.sub.entries) {
        TermPtr ne = invert(u, img, e, depth, st);
        if (st == InvSt::Fail) st = InvSt::Stuck;  // pruning not attempted
        if (st != InvSt::Ok) return nullptr;
        ns.entries.push_back(ne);
      }
      h.sub = std::move(ns);
    }
    std::vector<TermPtr> sp;
    for (auto& a : t->spine) {
      TermPtr na = invert(u, img, a, depth, st);
      if (st != InvSt::Ok) return nullptr;
      sp.push_back(na);
    }
    return mk_neutral(std::move(h), std::move(sp));
  }

  UnifyResult flex_rigid(const LFCtx& cx, const TermPtr& f, const TermPtr& r) {
    const std::string& u = f->head.name;
    auto it = delta_.find(u);
    if (it == delta_.end() || it->second.kind != MetaType::Box)
      return UnifyResult::Stuck;
    const MetaType& uty = it->second;
    std::vector<int> img;
    if (!pattern_check(f, img)) return UnifyResult::Stuck;
    // an empty substitution on a non-empty domain denotes the identity
    if (f->head.sub.is_empty() && !uty.cx.decls.empty()) {
      for (int i = (int)uty.cx.decls.size() - 1; i >= 0; i--) img.push_back(i);
    }
    InvSt st = InvSt::Ok;
    TermPtr body = invert(u, img, r, 0, st);
    if (st == InvSt::Fail) return UnifyResult::Fail;
    if (st == InvSt::Stuck) return UnifyResult::Stuck;
    store_.set(u, mk_contextual(uty.cx, body));
    // typed binding: the occurrence's type must match the solution's type
    UnifyResult tr = UnifyResult::Solved;
    try {
      TypePtr got = LFChecker(sig_, delta_).infer_neutral(cx, r);
      TypePtr want = f->head.sub.is_empty()
                         ? uty.head
                         : apply_subst_type(f->head.sub, uty.head);
      tr = un_type(cx, zonk_type(got, store_lookup(store_)),
                   zonk_type(want, store_lookup(store_)));
    } catch (const Diag&) {
      // type of the solution is not inferable here (e.g. mixed flexible
      // spines); fall back to untyped binding
    }
    return tr;
  }

  UnifyResult flex_flex(const LFCtx& cx, const TermPtr& a, const TermPtr& b) {
    if (a->head.name == b->head.name)
      return un_sub(cx, a->head.sub, b->head.sub);
    // distinct flexible variables: only the directly shared-context case
    if (a->head.sub.is_empty() && b->head.sub.is_empty() && a->spine.empty() &&
        b->spine.empty()) {
      auto ia = delta_.find(a->head.name);
      auto ib = delta_.find(b->head.name);
      if (ia == delta_.end() || ib == delta_.end()) return UnifyResult::Stuck;
      if (ia->second.kind != MetaType::Box || ib->second.kind != MetaType::Box)
        return UnifyResult::Stuck;
      if (!equal_ctx(ia->second.cx, ib->second.cx)) return UnifyResult::Stuck;
      // prefer eliminating insertion variables ('#'/'?') over named ones
      auto internal = [](const std::string& n) {
        return !n.empty() && (n[0] == '#' || n[0] == '?');
      };
      const TermPtr& victim =
          !internal(a->head.name) && internal(b->head.name) ? b : a;
      const TermPtr& keep = victim == a ? b : a;
      store_.set(victim->head.name,
                 mk_contextual(ia->second.cx, mk_mvar(keep->head.name)));
      return un_type(ia->second.cx,
                     zonk_type(ia->second.head, store_lookup(store_)),
                     zonk_type(ib->second.head, store_lookup(store_)));
    }
    return UnifyResult::Stuck;
  }

  UnifyResult un_type(const LFCtx& cx, const TypePtr& a, const TypePtr& b) {
    // '_' is the not-yet-reconstructed type of a script pattern variable;
    // it matches anything and is pinned down by the proof checker later
    if ((!a->is_pi && a->family == "_") || (!b->is_pi && b->family == "_"))
      return UnifyResult::Solved;
    if (a->is_pi != b->is_pi) return UnifyResult::Fail;
    if (a->is_pi) {
      if (a->param != b->param) return UnifyResult::Fail;
      UnifyResult r = un_type(cx, a->dom, b->dom);
      if (r == UnifyResult::Fail) return r;
      return worst(r, un_type(extend_dummy(cx), a->cod, b->cod));
    }
    if (a->family != b->family || a->args.size() != b->args.size())
      return UnifyResult::Fail;
    UnifyResult r = UnifyResult::Solved;
    for (size_t i = 0; i < a->args.size(); i++) {
      r = worst(r, un_term(cx, zonk_term(a->args[i], store_lookup(store_)),
                           zonk_term(b->args[i], store_lookup(store_))));
      if (r == UnifyResult::Fail) return r;
    }
    return r;
  }
};

// One-shot helper: unify under a fresh mark; roll back unless solved.
inline UnifyResult unify_terms(const Signature& sig, MetaStore& store,
                               const MetaTypeEnv& delta,
                               const Unifier::IsFlex& flex, const LFCtx& cx,
                               const TermPtr& a, const TermPtr& b) {
  size_t m = store.mark();
  UnifyResult r = Unifier(sig, store, delta, flex).term(cx, a, b);
  if (r != UnifyResult::Solved) store.undo_to(m);
  return r;
}
inline UnifyResult unify_types(const Signature& sig, MetaStore& store,
                               const MetaTypeEnv& delta,
                               const Unifier::IsFlex& flex, const LFCtx& cx,
                               const TypePtr& a, const TypePtr& b) {
  size_t m = store.mark();
  UnifyResult r = Unifier(sig, store, delta, flex).type(cx, a, b);
  if (r != UnifyResult::Solved) store.undo_to(m);
  return r;
}

}  // namespace blf
