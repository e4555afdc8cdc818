#pragma once

// Focused proof search at the LF level. Goals alternate between a uniform
// phase (introduce lambdas until the goal is atomic) and a focusing phase
// (pick a head, decompose its type into unification constraints for the
// indices plus premise subgoals, and recurse on the premises). Uniform steps
// are free; entering a focus phase consumes one unit of the depth budget and
// premise subgoals are searched with the remainder.
//
// Candidate order is deterministic: local LF variables newest-first, then
// meta-variable assumptions newest-first, then signature constants of the
// goal's family in declaration order. Backtracking is chronological: a later
// premise failing re-enumerates the solutions of earlier premises.
//
// Dependent (param) argument positions are indices: they are never searched,
// only determined by unification; a candidate whose indices stay open after
// all premises are solved is rejected (non-ground proof).

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blf/ast.hpp"
#include "blf/subst.hpp"
#include "blf/typecheck.hpp"
#include "blf/unify.hpp"

namespace blf {

class LFSearch {
 public:
  // `menv` must contain types for every meta that may occur in goals; the
  // search registers its own existentials ('%'-prefixed, unwritable) there.
  LFSearch(const Signature& sig, MetaStore& store, const MetaCtx& delta,
           MetaTypeEnv& menv)
      : sig_(sig), store_(store), delta_(delta), menv_(menv) {}

  // Proves cx |- ? : goal. On success the returned term is fully resolved.
  std::optional<TermPtr> prove(const LFCtx& cx, const TypePtr& goal,
                               int depth) {
    size_t m = store_.mark();
    TermPtr out;
    bool ok = uniform(cx, goal, depth, [&](const TermPtr& t) {
      out = zonk_term(t, look());
      return true;
    });
    if (!ok) {
      store_.undo_to(m);
      return std::nullopt;
    }
#ifdef BLF_TRACE
    fprintf(stderr, "[lf] found %s : %s\n", Printer(&sig_).term(out).c_str(),
            Printer(&sig_).type(zonk_type(goal, look())).c_str());
    if (!out->is_lam())
      for (auto& a : out->spine)
        fprintf(stderr, "[lf]   arg %s\n", Printer(&sig_).term(a).c_str());
#endif
    // soundness: everything emitted re-checks independently; the checker is
    // store-free, so it gets a fully resolved view of the environment
    MetaTypeEnv zenv;
    for (auto& [n, u] : menv_)
      if (!store_.get(n)) zenv[n] = zonk_metatype(u, look());
    lf_check(sig_, zenv, zonk_ctx(cx, look()), out,
             zonk_type(goal, look()));
    return out;
  }

 private:
  // Called once per proof found; returning true accepts it and stops the
  // enumeration, false asks for the next alternative.
  using OnProof = std::function<bool(const TermPtr&)>;

  const Signature& sig_;
  MetaStore& store_;
  const MetaCtx& delta_;
  MetaTypeEnv& menv_;
  int fresh_ = 0;
  std::vector<std::string> path_;  // loop guard for the current branch

  MetaLookup look() const { return store_lookup(store_); }
  static bool is_flex(const std::string& n) {
    return !n.empty() && n[0] == '%';
  }
  Unifier unifier() { return Unifier(sig_, store_, menv_, is_flex); }

  bool uniform(const LFCtx& cx, TypePtr goal, int depth,
               const OnProof& onp) {
    goal = zonk_type(goal, look());
    if (goal->is_pi) {
      std::string hint = goal->binder_hint.empty() ? "x" : goal->binder_hint;
      LFCtx cx2 = cx;
      cx2.decls.push_back(CtxDecl{hint, goal->dom, goal->param});
      return uniform(cx2, goal->cod, depth, [&](const TermPtr& b) {
        return onp(mk_lam(b, hint));
      });
    }
    return focus_any(cx, goal, depth, onp);
  }

  bool focus_any(const LFCtx& cx, const TypePtr& goal, int depth,
                 const OnProof& onp) {
    if (depth <= 0) return false;
    // cut trivial cycles on the current branch
    Printer pr(&sig_);
    std::string key = pr.type(zonk_type(goal, look()));
    for (auto& d : cx.decls) key += "|" + pr.type(zonk_type(d.type, look()));
    for (auto& g : path_)
      if (g == key) return false;
    size_t sz = path_.size();
    path_.push_back(key);
    bool r = focus_candidates(cx, goal, depth, onp);
    // on success the stack may already have been truncated below this frame
    // by solve_goals's frame lifting; never pop what is no longer ours
    if (path_.size() > sz) path_.resize(sz);
    return r;
  }

  bool focus_candidates(const LFCtx& cx, const TypePtr& goal, int depth,
                        const OnProof& onp) {
    // local variables, newest first
    int n = (int)cx.decls.size();
    for (int i = 0; i < n; i++) {
      TypePtr hty = shift_type(cx.decls[n - 1 - i].type, i + 1, 0);
      if (try_candidate(cx, mk_bvar(i), hty, goal, depth, onp)) return true;
    }
    // meta-variable assumptions, newest first
    for (auto it = delta_.rbegin(); it != delta_.rend(); ++it) {
      if (it->type.kind != MetaType::Box) continue;
      if (try_meta(cx, it->name, it->type, goal, depth, onp)) return true;
    }
    // signature constants of the goal's family, declaration order
    const LFFamily* fam = sig_.family(goal->family);
    if (fam) {
      for (auto& cn : fam->ctors) {
        const LFConst* c = sig_.lf_const(cn);
        if (try_candidate(cx, mk_const(cn), c->type, goal, depth, onp))
          return true;
      }
    }
    return false;
  }

  // Focuses on a head of type hty: existentials for every argument, target
  // unification, then premise search for the proof positions.
  bool try_candidate(const LFCtx& cx, const TermPtr& head, TypePtr hty,
                     const TypePtr& goal, int depth, const OnProof& onp) {
    size_t m = store_.mark();
    std::vector<TermPtr> spine;
    std::vector<std::pair<std::string, bool>> goals;  // name, is searched
    while (hty->is_pi) {
      auto [u, occ] = fresh_arg(cx, hty->dom);
      goals.emplace_back(u, !hty->param);
      spine.push_back(occ);
      hty = subst_top_type(hty->cod, occ);
      hty = zonk_type(hty, look());
    }
    TermPtr cand = mk_neutral(head->head, spine);
    UnifyResult ur = unifier().type(cx, hty, goal);
#ifdef BLF_TRACE
    fprintf(stderr, "[lf] cand %s for %s -> unify %d\n",
            Printer(&sig_).term(cand).c_str(),
            Printer(&sig_).type(zonk_type(goal, look())).c_str(), (int)ur);
#endif
    if (ur == UnifyResult::Solved &&
        solve_goals(goals, 0, depth, [&] { return onp(cand); }))
      return true;
    store_.undo_to(m);
    return false;
  }

  // An assumption u : [ucx |- P] is used through a substitution whose
  // entries are fresh existentials over the current context; param entries
  // are left to unification, proof entries become subgoals.
  bool try_meta(const LFCtx& cx, const std::string& name,
                const MetaType& uty0, const TypePtr& goal, int depth,
                const OnProof& onp) {
    size_t m = store_.mark();
    MetaType uty = zonk_metatype(uty0, look());
    Subst s;
    std::vector<std::pair<std::string, bool>> goals;
    for (auto& d : uty.cx.decls) {
      TypePtr want = d.type;
      if (!s.entries.empty()) want = apply_subst_type(s, want);
      auto [u, occ] = fresh_arg(cx, want);
      goals.emplace_back(u, !d.param);
      s.entries.push_back(occ);
    }
    TypePtr target =
        s.entries.empty() ? uty.head : apply_subst_type(s, uty.head);
    TermPtr cand =
        s.entries.empty() ? mk_mvar(name) : mk_mvar(name, std::move(s));
    if (unifier().type(cx, target, goal) == UnifyResult::Solved &&
        solve_goals(goals, 0, depth, [&] { return onp(cand); }))
      return true;
    store_.undo_to(m);
    return false;
  }

  std::pair<std::string, TermPtr> fresh_arg(const LFCtx& cx,
                                            const TypePtr& dom) {
    // menv_ is shared with the caller (and other engine instances): probe it
    // so existential names never collide with live bindings
    std::string u;
    do u = "%" + std::to_string(++fresh_);
    while (menv_.count(u));
    if (dom->is_pi) {
      // function-typed position: lower to a contextual variable so its
      // occurrences stay in the pattern fragment (u[...] instead of `u x`)
      LFCtx ucx = cx;
      TypePtr core = dom;
      int k = 0;
      while (core->is_pi) {
        ucx.decls.push_back(CtxDecl{core->binder_hint, core->dom, core->param});
        core = core->cod;
        k++;
      }
      menv_[u] = mk_boxed(ucx, core);
      TermPtr occ = mk_mvar(u, id_subst(ucx));
      for (int i = 0; i < k; i++) occ = mk_lam(occ);
      return {u, occ};
    }
    menv_[u] = mk_boxed(cx, dom);
    TermPtr occ = cx.decls.empty() ? mk_mvar(u) : mk_mvar(u, id_subst(cx));
    return {u, occ};
  }

  // Solves premise i, then the rest; enumerating alternatives for premise i
  // when the rest fails (chronological backtracking).
  bool solve_goals(const std::vector<std::pair<std::string, bool>>& goals,
                   size_t i, int depth, const std::function<bool()>& k) {
    if (i == goals.size()) {
      // index instantiation may still leave an argument open (the goal did
      // not determine it); such proofs are not ground, so reject
      for (auto& [u, searched] : goals)
        if (!store_.get(u) && !ground(zonk_term(mk_mvar(u), look())))
          return false;
      return k();
    }
    auto& [u, searched] = goals[i];
    if (!searched || store_.get(u))
      return solve_goals(goals, i + 1, depth, k);
    MetaType uty = zonk_metatype(menv_.at(u), look());
#ifdef BLF_TRACE
    fprintf(stderr, "[lf] premise %s : %s\n", u.c_str(),
            Printer(&sig_).type(uty.head).c_str());
#endif
    // the continuation runs inside this premise's search, but the loop-guard
    // frames pushed while finding its proof are finished once the proof is in
    // hand — lift them while the remaining premises are searched (restored on
    // backtracking) so a sibling premise of the same type is not mistaken for
    // a cycle
    size_t psz = path_.size();
    return uniform(uty.cx, uty.head, depth - 1, [&](const TermPtr& t) {
      size_t m = store_.mark();
      store_.set(u, mk_contextual(uty.cx, t));
      std::vector<std::string> lifted(path_.begin() + psz, path_.end());
      path_.resize(psz);
      if (solve_goals(goals, i + 1, depth, k)) return true;
      path_.insert(path_.end(), lifted.begin(), lifted.end());
      store_.undo_to(m);
      return false;
    });
  }

  static bool ground(const TermPtr& t) {
    if (t->is_lam()) return ground(t->lam_body);
    if (t->head.kind == Head::MVar && is_flex(t->head.name)) return false;
    for (auto& e : t->head.sub.entries)
      if (!ground(e)) return false;
    for (auto& a : t->spine)
      if (!ground(a)) return false;
    return true;
  }
};

}  // namespace blf
