#pragma once

// Brute-force oracles, independent of the search engine. Two facilities:
//
//  * Enumerator::provable — decides a computation-level goal by exhaustive
//    depth-bounded application of the sequent rules (intros, unboxing, left
//    focus on hypotheses and constructors, the level transition to LF
//    search). Meta-variable instantiation is done by first-order matching of
//    the candidate's target against the goal instead of unification, so the
//    oracle shares no solving code with the engine. Depth accounting mirrors
//    the engine: one unit per focusing step, premises at depth-1,
//    premise-free closures allowed at depth 0 at the computation level, and
//    a fresh LF budget when crossing the level rule.
//
//  * Enumerator::inhabitants — generates every closed canonical inhabitant
//    of an LF type built from at most `size` signature constants
//    (generate-and-check; callers re-validate against the kernel).
//
// Fragment: closed contexts only, no recursion/induction, no quantified
// premises on focused candidates. Anything outside is rejected with a
// diagnostic so oracle runs cannot silently under-approximate.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "blf/ast.hpp"
#include "blf/subst.hpp"

namespace blf {

class Enumerator {
 public:
  Enumerator(const Signature& sig, int depth) : sig_(sig), depth_(depth) {}

  bool provable(const CTypePtr& goal) {
    std::vector<TypePtr> delta;
    std::vector<CTypePtr> gamma;
    return right(delta, gamma, goal, depth_);
  }

  // Closed inhabitants of an atomic LF type with constant-nesting depth at
  // most `size` (a head and its deepest argument chain).
  std::vector<TermPtr> inhabitants(const TypePtr& goal, int size) const {
    return gen(LFCtx{}, goal, size);
  }

 private:
  const Signature& sig_;
  int depth_;

  // ------------------------------------------------------ computation level

  bool right(std::vector<TypePtr>& delta, std::vector<CTypePtr>& gamma,
             const CTypePtr& goal, int d) {
    if (goal->kind == CompType::Arrow) {
      gamma.push_back(goal->left);
      bool r = right(delta, gamma, goal->right, d);
      gamma.pop_back();
      return r;
    }
    if (goal->kind == CompType::PiBox) {
      if (goal->u.kind != MetaType::Box || !goal->u.cx.is_empty())
        throw Diag("oracle: quantifiers over open contexts are unsupported");
      // the bound name stays rigid in the body; its type is usable at the
      // LF level like any other assumption
      delta.push_back(goal->u.head);
      bool r = right(delta, gamma, goal->body, d);
      delta.pop_back();
      return r;
    }
    // uniform left: unbox every box hypothesis, keep the rest
    std::vector<TypePtr> dl = delta;
    std::vector<CTypePtr> done;
    for (auto& h : gamma) {
      if (h->kind == CompType::Box) {
        if (!h->cx.is_empty())
          throw Diag("oracle: open boxes are unsupported");
        dl.push_back(h->head);
      } else {
        done.push_back(h);
      }
    }
    return left(dl, done, goal, d);
  }

  bool left(std::vector<TypePtr>& delta0, std::vector<CTypePtr>& done0,
            const CTypePtr& goal, int d) {
    if (d < 0) return false;
    // invertible left rules first: a vacuous hypothesis closes the goal
    std::vector<TypePtr> delta = delta0;
    std::vector<CTypePtr> done = done0;
    if (saturate(delta, done)) return true;
    if (goal->kind == CompType::Box) {
      if (!goal->cx.is_empty())
        throw Diag("oracle: open box goals are unsupported");
      // level rule: fresh LF budget, one focusing unit to enter
      if (d > 0 && lf_provable(delta, LFCtx{}, goal->head, depth_))
        return true;
    }
    for (auto& h : done)
      if (focus(delta, done, h, goal, d)) return true;
    if (goal->kind == CompType::Atomic) {
      const CompTypeDecl* td = sig_.ctype(goal->name);
      if (!td) throw Diag("oracle: undeclared computation type " + goal->name);
      for (auto& cn : td->ctors)
        if (focus(delta, done, sig_.comp_const(cn)->type, goal, d))
          return true;
    }
    return false;
  }

  bool focus(std::vector<TypePtr>& delta, std::vector<CTypePtr>& done,
             CTypePtr h, const CTypePtr& goal, int d) {
    std::vector<CTypePtr> premises;
    while (h->kind == CompType::Arrow) {
      premises.push_back(h->left);
      h = h->right;
    }
    if (h->kind == CompType::PiBox)
      throw Diag("oracle: quantified premises are unsupported");
    bool blur = false;
    if (h->kind == CompType::Atomic && goal->kind == CompType::Atomic) {
      if (!equal_ctype(h, goal)) return false;
    } else if (h->kind == CompType::Box && goal->kind == CompType::Box) {
      // direct closure when the boxes agree; otherwise unbox and keep going
      if (!equal_ctype(h, goal)) blur = true;
    } else if (h->kind == CompType::Box && goal->kind == CompType::Atomic) {
      blur = true;  // the unboxed content may enable further steps
    } else {
      return false;
    }
    if (!premises.empty() && d <= 0) return false;
    for (auto& p : premises) {
      std::vector<TypePtr> dl = delta;
      std::vector<CTypePtr> g = done;
      if (!right(dl, g, p, d - 1)) return false;
    }
    if (blur) {
      if (!h->cx.is_empty()) throw Diag("oracle: open boxes are unsupported");
      std::vector<TypePtr> dl = delta;
      dl.push_back(h->head);
      return left(dl, done, goal, d - 1);
    }
    return true;
  }

  // ------------------------------------------------------ inversion (left)

  // Three-valued matching of a constructor pattern (markers for its
  // arguments) against a hypothesis that may mention universally quantified
  // meta-variables. Yes: matches as-is. No: a rigid clash rules the
  // constructor out for every instance. Maybe: undecided (a meta-variable is
  // in the way) — inversion then stays conservative and does nothing.
  enum class M3 { Yes, No, Maybe };
  static M3 m3_join(M3 a, M3 b) {
    if (a == M3::No || b == M3::No) return M3::No;
    if (a == M3::Maybe || b == M3::Maybe) return M3::Maybe;
    return M3::Yes;
  }
  static bool has_mvar(const TermPtr& t) {
    if (t->is_lam()) return has_mvar(t->lam_body);
    if (t->head.kind == Head::MVar && !is_marker(t->head)) return true;
    for (auto& e : t->head.sub.entries)
      if (has_mvar(e)) return true;
    for (auto& a : t->spine)
      if (has_mvar(a)) return true;
    return false;
  }
  static M3 match3_term(const TermPtr& a, const TermPtr& b, int depth,
                        std::map<std::string, TermPtr>& bind) {
    if (is_marker(a->head) && !a->is_lam() && a->spine.empty()) {
      if (!locally_closed(b, depth)) return M3::Maybe;
      TermPtr v = shift_term(b, -depth, depth);
      auto it = bind.find(a->head.name);
      if (it == bind.end()) {
        bind[a->head.name] = v;
        return M3::Yes;
      }
      if (equal_term(it->second, v)) return M3::Yes;
      return (has_mvar(it->second) || has_mvar(v)) ? M3::Maybe : M3::No;
    }
    if (a->is_lam() || b->is_lam()) {
      if (!a->is_lam() || !b->is_lam()) return M3::Maybe;
      return match3_term(a->lam_body, b->lam_body, depth + 1, bind);
    }
    if (b->head.kind == Head::MVar || a->head.kind == Head::MVar)
      return M3::Maybe;  // could unify under an instantiation
    if (a->head.kind != b->head.kind) return M3::No;
    if (a->head.kind == Head::Const && a->head.name != b->head.name)
      return M3::No;
    if (a->head.kind == Head::BVar && a->head.index != b->head.index)
      return M3::No;
    if (a->spine.size() != b->spine.size()) return M3::Maybe;
    M3 r = M3::Yes;
    for (size_t i = 0; i < a->spine.size(); i++)
      r = m3_join(r, match3_term(a->spine[i], b->spine[i], depth, bind));
    return r;
  }

  struct Inv {
    M3 m = M3::Maybe;                 // Yes: unique constructor, use prem
    std::vector<TypePtr> prem;       // its fully determined proof premises
  };

  // Inverts an atomic LF hypothesis: if exactly one constructor of its
  // family can target it and every other is rigidly excluded, the
  // hypothesis's derivation must use it, so its premises become available;
  // if all are excluded the hypothesis is vacuous (m == No).
  Inv invert_lf(const TypePtr& h) const {
    Inv out;
    if (h->is_pi) return out;
    const LFFamily* fam = sig_.family(h->family);
    if (!fam) return out;
    int yes = 0, no = 0;
    for (auto& cn : fam->ctors) {
      TypePtr cty = sig_.lf_const(cn)->type;
      std::vector<std::pair<std::string, TypePtr>> doms;
      std::vector<bool> is_param;
      int k = 0;
      while (cty->is_pi) {
        std::string m = "$" + std::to_string(++k);
        doms.emplace_back(m, cty->dom);
        is_param.push_back(cty->param);
        cty = subst_top_type(cty->cod, mk_mvar(m));
      }
      std::map<std::string, TermPtr> bind;
      M3 r = (cty->family != h->family || cty->args.size() != h->args.size())
                 ? M3::No
                 : M3::Yes;
      for (size_t i = 0; r != M3::No && i < cty->args.size(); i++)
        r = m3_join(r, match3_term(cty->args[i], h->args[i], 0, bind));
      if (r == M3::Maybe) return out;
      if (r == M3::No) {
        no++;
        continue;
      }
      yes++;
      if (yes > 1) return out;
      MetaSubst th;
      for (auto& [m, t] : bind) th[m] = mk_contextual(LFCtx{}, t);
      out.prem.clear();
      for (size_t i = 0; i < doms.size(); i++) {
        if (is_param[i]) continue;
        TypePtr p = apply_msubst(th, doms[i].second);
        if (has_marker_type(p)) return out;  // premise not determined
        out.prem.push_back(p);
      }
    }
    if (yes == 0 && no == (int)fam->ctors.size()) out.m = M3::No;
    if (yes == 1) out.m = M3::Yes;
    return out;
  }

  // Inversion fixpoint over the hypotheses. Returns true when a hypothesis
  // is vacuous (the sequent holds trivially); otherwise extends delta/done
  // with the forced premises. Mirrors the engine's uniform-left phase but is
  // built on first-order matching only.
  bool saturate(std::vector<TypePtr>& delta,
                std::vector<CTypePtr>& done) const {
    std::vector<bool> dlv(delta.size(), false), dnv(done.size(), false);
    for (int round = 0; round < 64; round++) {
      bool step = false;
      for (size_t i = 0; i < delta.size(); i++) {
        if (i >= dlv.size()) dlv.resize(delta.size(), false);
        if (dlv[i]) continue;
        Inv r = invert_lf(delta[i]);
        if (r.m == M3::No) return true;
        if (r.m != M3::Yes) continue;
        dlv[i] = true;
        step = true;
        for (auto& p : r.prem) delta.push_back(p);
      }
      for (size_t i = 0; i < done.size(); i++) {
        if (i >= dnv.size()) dnv.resize(done.size(), false);
        if (dnv[i]) continue;
        CTypePtr h = done[i];  // by value: the vector may grow below
        if (h->kind != CompType::Atomic || !h->args.empty()) continue;
        const CompTypeDecl* td = sig_.ctype(h->name);
        if (!td || !td->indices.empty()) continue;
        if (td->ctors.empty()) return true;  // empty computation type
        if (td->ctors.size() != 1) continue;
        CTypePtr cty = sig_.comp_const(td->ctors[0])->type;
        std::vector<CTypePtr> prem;
        while (cty->kind == CompType::Arrow) {
          prem.push_back(cty->left);
          cty = cty->right;
        }
        if (cty->kind != CompType::Atomic || cty->name != h->name) continue;
        dnv[i] = true;
        step = true;
        for (auto& p : prem) {
          if (p->kind == CompType::Box) {
            if (!p->cx.is_empty())
              throw Diag("oracle: open boxes are unsupported");
            delta.push_back(p->head);
          } else {
            done.push_back(p);
          }
        }
      }
      if (!step) break;
    }
    return false;
  }

  // --------------------------------------------------------------- LF level

  bool lf_provable(const std::vector<TypePtr>& delta, LFCtx cx, TypePtr goal,
                   int d) const {
    while (goal->is_pi) {
      cx.decls.push_back(CtxDecl{"x", goal->dom, goal->param});
      goal = goal->cod;
    }
    if (d <= 0) return false;
    int n = (int)cx.decls.size();
    for (int i = 0; i < n; i++) {
      const CtxDecl& dc = cx.decls[n - 1 - i];
      if (dc.param) continue;  // parameters are not usable by init
      if (lf_focus(delta, cx, shift_type(dc.type, i + 1, 0), goal, d))
        return true;
    }
    for (auto& hty : delta)
      if (lf_focus(delta, cx, hty, goal, d)) return true;
    if (const LFFamily* fam = sig_.family(goal->family))
      for (auto& cn : fam->ctors)
        if (lf_focus(delta, cx, sig_.lf_const(cn)->type, goal, d)) return true;
    return false;
  }

  bool lf_focus(const std::vector<TypePtr>& delta, const LFCtx& cx,
                TypePtr hty, const TypePtr& goal, int d) const {
    // open the Pi prefix with marker variables, match the target against the
    // goal, then search the instantiated proof premises
    std::vector<std::pair<std::string, TypePtr>> doms;  // marker, domain
    std::vector<bool> is_param;
    int k = 0;
    while (hty->is_pi) {
      std::string m = "$" + std::to_string(++k);
      doms.emplace_back(m, hty->dom);
      is_param.push_back(hty->param);
      hty = subst_top_type(hty->cod, mk_mvar(m));
    }
    std::map<std::string, TermPtr> bind;
    if (!match_type(hty, goal, 0, bind)) return false;
    MetaSubst th;
    for (auto& [m, t] : bind) th[m] = mk_contextual(LFCtx{}, t);
    for (size_t i = 0; i < doms.size(); i++) {
      if (is_param[i]) {
        if (!bind.count(doms[i].first)) return false;  // undetermined index
        continue;
      }
      TypePtr p = apply_msubst(th, doms[i].second);
      if (has_marker_type(p)) return false;  // premise not fully determined
      if (!lf_provable(delta, cx, p, d - 1)) return false;
    }
    return true;
  }

  static bool is_marker(const Head& h) {
    return h.kind == Head::MVar && !h.name.empty() && h.name[0] == '$';
  }
  static bool has_marker(const TermPtr& t) {
    if (t->is_lam()) return has_marker(t->lam_body);
    if (is_marker(t->head)) return true;
    for (auto& a : t->spine)
      if (has_marker(a)) return true;
    return false;
  }
  static bool has_marker_type(const TypePtr& a) {
    if (a->is_pi) return has_marker_type(a->dom) || has_marker_type(a->cod);
    for (auto& t : a->args)
      if (has_marker(t)) return true;
    return false;
  }
  static bool locally_closed(const TermPtr& t, int depth) {
    if (t->is_lam()) return locally_closed(t->lam_body, depth + 1);
    if (t->head.kind == Head::BVar && t->head.index < depth) return false;
    for (auto& a : t->spine)
      if (!locally_closed(a, depth)) return false;
    return true;
  }

  // First-order matching: markers on the left bind to the corresponding
  // right subterm; everything else must agree structurally.
  static bool match_term(const TermPtr& a, const TermPtr& b, int depth,
                         std::map<std::string, TermPtr>& bind) {
    if (a->is_lam() || b->is_lam()) {
      if (!a->is_lam() || !b->is_lam()) return false;
      return match_term(a->lam_body, b->lam_body, depth + 1, bind);
    }
    if (is_marker(a->head) && a->spine.empty()) {
      if (!locally_closed(b, depth)) return false;
      TermPtr v = shift_term(b, -depth, depth);
      auto it = bind.find(a->head.name);
      if (it != bind.end()) return equal_term(it->second, v);
      bind[a->head.name] = v;
      return true;
    }
    if (a->head.kind != b->head.kind) return false;
    switch (a->head.kind) {
      case Head::Const:
        if (a->head.name != b->head.name) return false;
        break;
      case Head::BVar:
        if (a->head.index != b->head.index) return false;
        break;
      case Head::MVar:
        if (a->head.name != b->head.name ||
            !equal_subst(a->head.sub, b->head.sub))
          return false;
        break;
    }
    if (a->spine.size() != b->spine.size()) return false;
    for (size_t i = 0; i < a->spine.size(); i++)
      if (!match_term(a->spine[i], b->spine[i], depth, bind)) return false;
    return true;
  }
  static bool match_type(const TypePtr& a, const TypePtr& b, int depth,
                         std::map<std::string, TermPtr>& bind) {
    if (a->is_pi || b->is_pi) return false;  // targets are atomic
    if (a->family != b->family || a->args.size() != b->args.size())
      return false;
    for (size_t i = 0; i < a->args.size(); i++)
      if (!match_term(a->args[i], b->args[i], depth, bind)) return false;
    return true;
  }

  // ------------------------------------------------------ term enumeration

  std::vector<TermPtr> gen(const LFCtx& cx, const TypePtr& ty,
                           int depth) const {
    std::vector<TermPtr> out;
    if (ty->is_pi) {
      LFCtx cx2 = cx;
      cx2.decls.push_back(CtxDecl{"x", ty->dom, ty->param});
      for (auto& b : gen(cx2, ty->cod, depth)) out.push_back(mk_lam(b));
      return out;
    }
    // bound variables whose type is exactly the goal
    int n = (int)cx.decls.size();
    for (int i = 0; i < n; i++)
      if (equal_type(shift_type(cx.decls[n - 1 - i].type, i + 1, 0), ty))
        out.push_back(mk_bvar(i));
    const LFFamily* fam = sig_.family(ty->family);
    if (!fam || depth < 1) return out;
    for (auto& cn : fam->ctors) {
      const LFConst* c = sig_.lf_const(cn);
      // argument lists left to right, each argument one level down
      std::vector<std::pair<std::vector<TermPtr>, TypePtr>> partial = {
          {{}, c->type}};
      for (;;) {
        bool any_pi = false;
        decltype(partial) next;
        for (auto& [args, rest] : partial) {
          if (!rest->is_pi) {
            next.emplace_back(args, rest);
            continue;
          }
          any_pi = true;
          for (auto& a : gen(cx, rest->dom, depth - 1)) {
            auto na = args;
            na.push_back(a);
            next.emplace_back(std::move(na), subst_top_type(rest->cod, a));
          }
        }
        partial = std::move(next);
        if (!any_pi) break;
      }
      for (auto& [args, rest] : partial)
        if (equal_type(rest, ty)) out.push_back(mk_const(cn, args));
    }
    return out;
  }
};

}  // namespace blf
