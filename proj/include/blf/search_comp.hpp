#pragma once

// Computation-level proof search and proof-script assembly.
//
// The engine follows a strict phase discipline:
//   1. intros            - peel the statement's quantifiers and hypotheses
//   2. uniform left      - a fixpoint of invertible steps: unboxing box
//                          hypotheses into the meta context (fused with an
//                          inversion when only one constructor applies),
//                          inverting meta entries and atomic computation
//                          hypotheses with a unique constructor, and closing
//                          branches vacuously when none applies
//   3. induction split   - case the designated variable, one branch per
//                          constructor accepted by coverage, generating
//                          induction hypotheses for the strict subterms
//   4. focused search    - backtracking choice phase: induction hypotheses
//                          first, then hypotheses newest-first, then
//                          computation constructors, and for box goals the
//                          level transition into LF search last
//
// Entering a focus consumes one depth unit; premises are searched with the
// remainder; the level rule restarts with the configured LF budget. On
// failure the partial script is kept with a named hole per open branch.

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blf/ast.hpp"
#include "blf/search_lf.hpp"
#include "blf/subst.hpp"
#include "blf/typecheck.hpp"
#include "blf/unify.hpp"

namespace blf {

struct CompOptions {
  int depth = 3;
  std::optional<int> induction;  // 1-based explicit argument position
  unsigned seed = 0;  // permutes invertible-step order (determinism tests)
};

struct CompResult {
  bool ok = false;
  ProofScript script;
  std::vector<std::string> open;  // unproved branches (named holes)
  std::string fingerprint;        // canonical post-uniform-phase state
};

class CompSearch {
 public:
  CompSearch(const Signature& sig, CompOptions opt = {})
      : sig_(sig), opt_(opt), rng_(opt.seed) {}

  CompResult prove(const std::string& name, const CTypePtr& type) {
    reset();
    self_ = name;
    thm_type_ = type;
    CompResult res;
    res.script.theorem = name;
    res.script.type = type;
    res.script.totality = opt_.induction;

    // intros: the uniform right phase over the statement
    std::vector<Hyp> pending;
    CTypePtr goal = type;
    while (true) {
      if (goal->kind == CompType::PiBox) {
        menv_[goal->name] = goal->u;
        delta_.push_back(MetaDecl{goal->name, goal->u});
        res.script.delta.push_back(MetaDecl{goal->name, goal->u});
        goal = goal->body;
        continue;
      }
      if (goal->kind == CompType::Arrow) {
        std::string n = fresh_lower();
        res.script.gamma.emplace_back(n, goal->left);
        pending.push_back(Hyp{n, goal->left, mk_cvar(n)});
        goal = goal->right;
        continue;
      }
      break;
    }

    if (opt_.induction) setup_induction(res);

    CExprPtr solve = drive(std::move(pending), {}, goal, opt_.depth,
                           /*top=*/true, /*allow_split=*/true, "goal");
    res.script.solve = zonk_cexpr(solve, store_lookup(store_));
    res.ok = open_.empty();
    res.open = open_;
    res.fingerprint = fp_;
    return res;
  }

 private:
  struct Hyp {
    std::string name;  // empty for synthesized scrutinees (blur)
    CTypePtr type;
    CExprPtr expr;
  };

  const Signature& sig_;
  CompOptions opt_;
  MetaStore store_;
  MetaTypeEnv menv_;
  MetaCtx delta_;  // universal entries visible to the LF-level search
  std::mt19937 rng_;
  int upper_ = 0, lower_ = 0, exist_ = 0;
  std::string self_;
  CTypePtr thm_type_;
  int ind_pos_ = -1;
  std::string ind_family_;
  std::string root_hyp_;           // induction argument when it is in Γ
  std::set<std::string> roots_;    // meta names equal to the argument
  std::set<std::string> sub_;      // strict subterms of the argument
  std::vector<std::string> open_;  // open branch labels
  std::string fp_;
  // universal metas belonging to enclosing scopes, one snapshot per open
  // premise; refinements of those may not escape the premise (see
  // solve_premise)
  std::vector<std::set<std::string>> premise_outer_;

  bool protected_binding_since(size_t m0) const {
    if (premise_outer_.empty()) return false;
    const std::set<std::string>& prot = premise_outer_.back();
    for (size_t i = m0; i < store_.mark(); i++)
      if (prot.count(store_.trail_at(i))) return true;
    return false;
  }

  // Would inverting P by cn refine a universal owned by an enclosing scope?
  bool inversion_scope_ok(const TypePtr& P, const std::string& cn) {
    if (premise_outer_.empty()) return true;
    size_t m = store_.mark();
    LFPat pat = inst_lf_ctor(*sig_.lf_const(cn), [&](const std::string&) {
      return fresh_exist();
    });
    refine_unifier().type(LFCtx{}, pat.result, P);
    bool ok = !protected_binding_since(m);
    store_.undo_to(m);
    return ok;
  }
  bool comp_inversion_scope_ok(const CTypePtr& s, const std::string& cn) {
    if (premise_outer_.empty()) return true;
    size_t m = store_.mark();
    CPat pat = inst_comp_ctor(*sig_.comp_const(cn), /*probe=*/true);
    refine_unifier().ctype(pat.result, s);
    bool ok = !protected_binding_since(m);
    store_.undo_to(m);
    return ok;
  }

  void reset() {
    store_ = MetaStore();
    menv_.clear();
    delta_.clear();
    upper_ = lower_ = exist_ = 0;
    roots_.clear();
    sub_.clear();
    open_.clear();
    fp_.clear();
    premise_outer_.clear();
    root_hyp_.clear();
    ind_pos_ = -1;
    ind_family_.clear();
  }

  MetaLookup look() const { return store_lookup(store_); }
  static bool exist_flex(const std::string& n) {
    return !n.empty() && n[0] == '%';
  }
  static bool all_flex(const std::string&) { return true; }
  Unifier rigid_unifier() { return Unifier(sig_, store_, menv_, exist_flex); }
  Unifier refine_unifier() { return Unifier(sig_, store_, menv_, all_flex); }

  bool used_name(const std::string& n) const {
    return menv_.count(n) || sig_.declared(n);
  }
  std::string fresh_upper(const std::string& hint = "X") {
    std::string base = hint.empty() || !isupper((unsigned char)hint[0])
                           ? std::string("X")
                           : hint;
    for (;;) {
      std::string n = upper_ == 0 ? base : base + std::to_string(upper_);
      upper_++;
      if (!used_name(n)) return n;
    }
  }
  std::string fresh_lower() {
    for (;;) {
      std::string n =
          lower_ == 0 ? std::string("x") : "x" + std::to_string(lower_);
      lower_++;
      if (!used_name(n)) return n;
    }
  }
  std::string fresh_exist() {
    std::string u;
    do u = "%" + std::to_string(++exist_);
    while (menv_.count(u));
    return u;
  }

  // ------------------------------------------------------------ induction

  void setup_induction(const CompResult& res) {
    ind_pos_ = *opt_.induction;
    int k = *opt_.induction;
    CTypePtr t = thm_type_;
    size_t di = 0, gi = 0;
    while (true) {
      if (t->kind == CompType::PiBox) {
        if (!t->implicit && --k == 0) {
          if (t->u.kind != MetaType::Box || t->u.head->is_pi)
            throw Diag("cannot split on this argument");
          roots_.insert(res.script.delta[di].name);
          ind_family_ = t->u.head->family;
          return;
        }
        di++;
        t = t->body;
        continue;
      }
      if (t->kind == CompType::Arrow) {
        if (--k == 0) {
          if (t->left->kind != CompType::Box || t->left->head->is_pi)
            throw Diag("cannot split on this argument");
          root_hyp_ = res.script.gamma[gi].first;
          ind_family_ = t->left->head->family;
          return;
        }
        gi++;
        t = t->right;
        continue;
      }
      throw Diag("induction index out of range");
    }
    ind_pos_ = *opt_.induction;
  }

  // -------------------------------------------------- pattern instantiation

  struct LFPat {
    std::vector<TermPtr> spine;
    std::vector<std::pair<std::string, MetaType>> vars;
    TypePtr result;
  };

  // Instantiates an LF constructor with fresh variables; `mk` supplies the
  // name for each argument position.
  template <class MkName>
  LFPat inst_lf_ctor(const LFConst& c, MkName mk) {
    LFPat out;
    TypePtr ty = c.type;
    Subst built;
    while (ty->is_pi) {
      TypePtr dom = built.entries.empty() ? ty->dom
                                          : apply_subst_type(built, ty->dom);
      std::string n = mk(ty->binder_hint);
      if (dom->is_pi) {
        LFCtx ucx;
        TypePtr core = dom;
        while (core->is_pi) {
          ucx.decls.push_back(
              CtxDecl{core->binder_hint, core->dom, core->param});
          core = core->cod;
        }
        menv_[n] = mk_boxed(ucx, core);
        out.vars.emplace_back(n, menv_[n]);
        TermPtr occ = eta_closure_n(n, (int)ucx.decls.size());
        out.spine.push_back(occ);
        built.entries.push_back(occ);
      } else {
        menv_[n] = mk_boxed(LFCtx{}, dom);
        out.vars.emplace_back(n, menv_[n]);
        out.spine.push_back(mk_mvar(n));
        built.entries.push_back(mk_mvar(n));
      }
      ty = ty->cod;
    }
    out.result =
        built.entries.empty() ? ty : apply_subst_type(built, ty);
    return out;
  }

  static TermPtr eta_closure_n(const std::string& u, int k) {
    Subst s;
    for (int i = k - 1; i >= 0; i--) s.entries.push_back(mk_bvar(i));
    TermPtr t = mk_mvar(u, std::move(s));
    for (int i = 0; i < k; i++) t = mk_lam(t);
    return t;
  }

  // Which LF constructors can produce P (and optionally the known term)?
  // exact=false when a probe got stuck, making inversion unsafe.
  std::vector<std::string> lf_required(const TypePtr& P, const TermPtr& tm,
                                       bool* exact) {
    *exact = true;
    std::vector<std::string> req;
    const LFFamily* fam = sig_.family(P->family);
    if (!fam) return req;
    for (auto& cn : fam->ctors) {
      const LFConst* c = sig_.lf_const(cn);
      size_t m = store_.mark();
      LFPat pat = inst_lf_ctor(*c, [&](const std::string&) {
        return fresh_exist();
      });
      Unifier un = refine_unifier();
      UnifyResult r = un.type(LFCtx{}, pat.result, P);
      if (r != UnifyResult::Fail && tm)
        r = worst(r, un.term(LFCtx{}, mk_const(cn, pat.spine), tm));
      store_.undo_to(m);
      if (r == UnifyResult::Stuck) *exact = false;
      if (r != UnifyResult::Fail) req.push_back(cn);
    }
    return req;
  }

  // Computation constructor instantiation: implicit quantifiers become
  // existentials, explicit quantifiers universal names, arrows hypotheses.
  struct CPat {
    std::vector<std::string> args;  // explicit binder names in order
    std::vector<Hyp> hyps;          // arrow arguments
    CTypePtr result;
  };

  CPat inst_comp_ctor(const CompConst& c, bool probe) {
    CPat out;
    CTypePtr t = c.type;
    MetaSubst ren;
    while (true) {
      t = apply_msubst(ren, t);
      ren.clear();
      if (t->kind == CompType::PiBox) {
        std::string n;
        if (t->implicit || probe)
          n = fresh_exist();
        else
          n = fresh_upper(t->name);
        menv_[n] = t->u;
        if (!t->implicit && !probe) {
          delta_.push_back(MetaDecl{n, t->u});
          out.args.push_back(n);
        }
        if (t->name != n)
          ren[t->name] = meta_occurrence(n, t->u);
        t = t->body;
        continue;
      }
      if (t->kind == CompType::Arrow) {
        std::string n = probe ? fresh_exist() : fresh_lower();
        if (!probe) out.args.push_back(n);
        out.hyps.push_back(Hyp{n, t->left, mk_cvar(n)});
        t = t->right;
        continue;
      }
      break;
    }
    out.result = t;
    return out;
  }

  static MetaTerm meta_occurrence(const std::string& n, const MetaType& ty) {
    LFCtx cx = ty.kind == MetaType::Box ? ty.cx : LFCtx{};
    TermPtr occ = cx.decls.empty() ? mk_mvar(n) : mk_mvar(n, id_subst(cx));
    return mk_contextual(cx, occ);
  }

  std::vector<std::string> comp_required(const CTypePtr& s, bool* exact) {
    *exact = true;
    std::vector<std::string> req;
    const CompTypeDecl* d = sig_.ctype(s->name);
    if (!d) return req;
    for (auto& cn : d->ctors) {
      size_t m = store_.mark();
      CPat pat = inst_comp_ctor(*sig_.comp_const(cn), /*probe=*/true);
      UnifyResult r = refine_unifier().ctype(pat.result, s);
      store_.undo_to(m);
      if (r == UnifyResult::Stuck) *exact = false;
      if (r != UnifyResult::Fail) req.push_back(cn);
    }
    return req;
  }

  // --------------------------------------------------------- uniform phase

  static CExprPtr mk_impossible(CExprPtr scrut) {
    auto e = std::make_shared<CompExpr>();
    e->kind = CompExpr::CaseMeta;
    e->scrut = std::move(scrut);
    return e;
  }

  // One invertible action; `wrap` receives the continuation body.
  struct Step {
    bool terminal = false;
    CExprPtr expr;  // terminal: the closing expression
    std::function<CExprPtr(CExprPtr)> wrap;
  };

  // The uniform-left/inversion fixpoint followed by split and search.
  CExprPtr drive(std::vector<Hyp> pending, std::vector<Hyp> done,
                 CTypePtr goal, int depth, bool top, bool allow_split,
                 const std::string& label) {
    std::vector<std::function<CExprPtr(CExprPtr)>> wraps;
    auto finish = [&](CExprPtr inner) {
      for (auto it = wraps.rbegin(); it != wraps.rend(); ++it)
        inner = (*it)(inner);
      return inner;
    };

    for (int round = 0; round < 50; round++) {
      // non-box hypotheses shift out of the pending list
      for (size_t i = 0; i < pending.size();) {
        CTypePtr z = zonk_ctype(pending[i].type, look());
        if (z->kind != CompType::Box) {
          pending[i].type = z;
          done.push_back(pending[i]);
          pending.erase(pending.begin() + (long)i);
        } else {
          i++;
        }
      }
      struct Action {
        enum K { Unbox, InvDelta, InvComp, VacDelta, VacComp } k;
        size_t idx;
        std::string ctor;
      };
      std::vector<Action> acts;
      for (size_t i = pending.size(); i-- > 0;)
        acts.push_back({Action::Unbox, i, ""});
      for (size_t i = 0; i < delta_.size(); i++) {
        if (delta_[i].type.kind != MetaType::Box) continue;
        MetaType u = zonk_metatype(delta_[i].type, look());
        if (u.cx.var || !u.cx.decls.empty() || u.head->is_pi) continue;
        if (store_.get(delta_[i].name)) continue;  // already refined away
        if (!sig_.family(u.head->family)) continue;
        bool exact = true;
        auto req = lf_required(u.head, nullptr, &exact);
        if (req.empty() && exact)
          acts.push_back({Action::VacDelta, i, ""});
        else if (req.size() == 1 && exact && worth_inverting(u.head, req[0]) &&
                 inversion_scope_ok(u.head, req[0]))
          acts.push_back({Action::InvDelta, i, req[0]});
      }
      for (size_t i = 0; i < done.size(); i++) {
        CTypePtr z = zonk_ctype(done[i].type, look());
        if (z->kind != CompType::Atomic) continue;
        bool exact = true;
        auto req = comp_required(z, &exact);
        if (req.empty() && exact)
          acts.push_back({Action::VacComp, i, ""});
        else if (req.size() == 1 && exact &&
                 comp_inversion_scope_ok(z, req[0]))
          acts.push_back({Action::InvComp, i, req[0]});
      }
      if (acts.empty()) break;
      size_t pick = 0;
      if (opt_.seed != 0)
        pick = std::uniform_int_distribution<size_t>(0, acts.size() - 1)(rng_);
      const Action a = acts[pick];

      if (a.k == Action::Unbox) {
        Hyp h = pending[a.idx];
        pending.erase(pending.begin() + (long)a.idx);
        Step st = unbox_step(h);
        if (st.terminal) return finish(st.expr);
        wraps.push_back(st.wrap);
        // a fused inversion may not add hypotheses; a plain unbox adds a
        // meta entry; nothing to merge into pending either way
        continue;
      }
      if (a.k == Action::VacDelta) {
        return finish(
            mk_impossible(mk_cbox(LFCtx{}, mk_mvar(delta_[a.idx].name))));
      }
      if (a.k == Action::InvDelta) {
        std::string u = delta_[a.idx].name;
        MetaType uty = zonk_metatype(delta_[a.idx].type, look());
        delta_.erase(delta_.begin() + (long)a.idx);
        wraps.push_back(invert_delta(u, uty, a.ctor));
        continue;
      }
      Hyp g = done[a.idx];
      done.erase(done.begin() + (long)a.idx);
      if (a.k == Action::VacComp) return finish(mk_impossible(g.expr));
      auto [wrap, hyps] = invert_comp(g, a.ctor);
      wraps.push_back(wrap);
      for (auto& h : hyps) pending.push_back(h);
    }

    if (top) fp_ = fingerprint(pending, done, goal);

    // induction split
    if (allow_split && opt_.induction && !roots_.empty() &&
        !split_subject().empty()) {
      CExprPtr c = split(split_subject(), done, goal, depth);
      return finish(c);
    }

    CExprPtr found = search(done, goal, depth);
    if (found) return finish(found);
    if (top) {
      open_.push_back(label);
      return finish(mk_chole(label));
    }
    return nullptr;
  }

  // Skip inversions that would not make progress: a unique constructor with
  // no arguments and a target identical to the type refines nothing.
  bool worth_inverting(const TypePtr& P, const std::string& cn) {
    const LFConst* c = sig_.lf_const(cn);
    if (c->type->is_pi) return true;
    return !equal_type(zonk_type(c->type, look()), P);
  }

  std::string split_subject() const {
    for (auto& r : roots_)
      for (auto& d : delta_)
        if (d.name == r && !store_.get(r)) return r;
    return "";
  }

  // Unboxes hypothesis h; fuses with an inversion when unique.
  Step unbox_step(const Hyp& h) {
    Step st;
    CTypePtr box = zonk_ctype(h.type, look());
    bool closed = !box->cx.var && box->cx.decls.empty();
    bool exact = true;
    std::vector<std::string> req;
    if (closed && sig_.family(box->head->family))
      req = lf_required(box->head, nullptr, &exact);
    if (closed && req.empty() && exact && sig_.family(box->head->family)) {
      st.terminal = true;
      st.expr = mk_impossible(h.expr);
      return st;
    }
    if (closed && req.size() == 1 && exact &&
        inversion_scope_ok(box->head, req[0])) {
      size_t mm = store_.mark();
      const LFConst* c = sig_.lf_const(req[0]);
      LFPat pat = inst_lf_ctor(*c, [&](const std::string&) {
        return fresh_upper();
      });
      if (refine_unifier().type(LFCtx{}, pat.result, box->head) ==
          UnifyResult::Solved &&
          !protected_binding_since(mm)) {
        for (auto& [n, t] : pat.vars) delta_.push_back(MetaDecl{n, t});
        mark_subterms(h.name == root_hyp_ ? "" : "-", pat);
        auto e = std::make_shared<CompExpr>();
        e->kind = CompExpr::CaseMeta;
        e->is_let = true;
        e->scrut = h.expr;
        if (h.expr->kind == CompExpr::Var) e->ascription = box;
        MetaBranch br;
        br.pat = mk_const(req[0], pat.spine);
        br.pat_vars = pat.vars;
        e->mbranches.push_back(std::move(br));
        st.wrap = [e](CExprPtr body) {
          e->mbranches[0].body = std::move(body);
          return std::static_pointer_cast<CompExpr>(e);
        };
        return st;
      }
      // refinement got stuck: fall through to a plain unbox
      store_.undo_to(mm);
    }
    std::string u = fresh_upper();
    menv_[u] = mk_boxed(box->cx, box->head);
    delta_.push_back(MetaDecl{u, menv_[u]});
    if (h.name == root_hyp_) roots_.insert(u);
    CExprPtr scrut = h.expr;
    st.wrap = [u, scrut](CExprPtr body) {
      return mk_cletbox(u, scrut, std::move(body));
    };
    return st;
  }

  // root=="" means the source is the induction argument; "-" means unrelated
  void mark_subterms(const std::string& root, const LFPat& pat) {
    if (root == "-") return;
    for (auto& [n, t] : pat.vars)
      if (t.kind == MetaType::Box && !t.head->is_pi &&
          t.head->family == ind_family_)
        sub_.insert(n);
  }

  std::function<CExprPtr(CExprPtr)> invert_delta(const std::string& u,
                                                 const MetaType& uty,
                                                 const std::string& ctor) {
    const LFConst* c = sig_.lf_const(ctor);
    LFPat pat = inst_lf_ctor(*c, [&](const std::string&) {
      return fresh_upper();
    });
    Unifier un = refine_unifier();
    un.type(LFCtx{}, pat.result, uty.head);
    // only the indices are refined; u itself stays unbound so the emitted
    // scrutinee keeps referring to it (the pattern variables supersede it
    // as assumptions either way)
    for (auto& [n, t] : pat.vars) delta_.push_back(MetaDecl{n, t});
    mark_subterms(roots_.count(u) || sub_.count(u) ? "" : "-", pat);
    auto e = std::make_shared<CompExpr>();
    e->kind = CompExpr::CaseMeta;
    e->is_let = true;
    e->scrut = mk_cbox(LFCtx{}, mk_mvar(u));
    MetaBranch br;
    br.pat = mk_const(ctor, pat.spine);
    br.pat_vars = pat.vars;
    e->mbranches.push_back(std::move(br));
    return [e](CExprPtr body) {
      e->mbranches[0].body = std::move(body);
      return std::static_pointer_cast<CompExpr>(e);
    };
  }

  std::pair<std::function<CExprPtr(CExprPtr)>, std::vector<Hyp>> invert_comp(
      const Hyp& g, const std::string& ctor) {
    CTypePtr z = zonk_ctype(g.type, look());
    CPat pat = inst_comp_ctor(*sig_.comp_const(ctor), /*probe=*/false);
    refine_unifier().ctype(pat.result, z);
    auto e = std::make_shared<CompExpr>();
    e->kind = CompExpr::CaseComp;
    e->is_let = true;
    e->scrut = g.expr;
    if (g.expr->kind == CompExpr::Var) e->ascription = z;
    CompBranch br;
    br.ctor = ctor;
    br.args = pat.args;
    e->cbranches.push_back(std::move(br));
    auto wrap = [e](CExprPtr body) {
      e->cbranches[0].body = std::move(body);
      return std::static_pointer_cast<CompExpr>(e);
    };
    return {wrap, pat.hyps};
  }

  // ----------------------------------------------------------------- split

  CExprPtr split(const std::string& subject, const std::vector<Hyp>& done,
                 const CTypePtr& goal, int depth) {
    MetaType uty;
    for (auto& d : delta_)
      if (d.name == subject) uty = zonk_metatype(d.type, look());
    bool exact = true;
    std::vector<std::string> req = lf_required(uty.head, nullptr, &exact);
    auto e = std::make_shared<CompExpr>();
    e->kind = CompExpr::CaseMeta;
    e->scrut = mk_cbox(LFCtx{}, mk_mvar(subject));
    for (auto& cn : req) {
      size_t m = store_.mark();
      MetaCtx saved_delta = delta_;
      std::set<std::string> saved_sub = sub_;
      const LFConst* c = sig_.lf_const(cn);
      LFPat pat = inst_lf_ctor(*c, [&](const std::string&) {
        return fresh_upper();
      });
      Unifier un = refine_unifier();
      un.type(LFCtx{}, pat.result, uty.head);
      un.term(LFCtx{}, mk_const(cn, pat.spine), mk_mvar(subject));
      for (auto& [n, t] : pat.vars) delta_.push_back(MetaDecl{n, t});
      mark_subterms("", pat);
      std::string label = "case_" + flat_name(cn);
      CExprPtr body = drive({}, done, goal, depth, /*top=*/false,
                            /*allow_split=*/false, label);
      if (!body) {
        open_.push_back(label);
        body = mk_chole(label);
      }
      MetaBranch br;
      br.pat = zonk_term(mk_const(cn, pat.spine), look());
      br.pat_vars = pat.vars;
      br.body = zonk_cexpr(body, look());
      e->mbranches.push_back(std::move(br));
      store_.undo_to(m);
      delta_ = std::move(saved_delta);
      sub_ = std::move(saved_sub);
    }
    return e;
  }

  static std::string flat_name(const std::string& s) {
    std::string r;
    for (char c : s) r += (c == '/') ? '_' : c;
    return r;
  }

  // ---------------------------------------------------------------- search

  // Entering a focus consumes one depth unit for its premises; a focus that
  // closes by unification alone (init) is allowed even at depth 0.
  CExprPtr search(const std::vector<Hyp>& done, CTypePtr goal, int depth) {
    goal = zonk_ctype(goal, look());
#ifdef BLF_TRACE
    fprintf(stderr, "[cs] search d=%d goal %s\n", depth,
            Printer(&sig_).ctype(goal).c_str());
#endif
    if (depth < 0) return nullptr;
    // Two passes: direct closures first (ending with the level rule), then
    // blur closures — using a focused hypothesis only through its unboxed
    // conclusion is a last resort, so it cannot shadow a solution the
    // context already offers.
    for (int pass = 0; pass < 2; pass++) {
      bool blur = pass == 1;
      // induction hypotheses first (strict-subterm guarded)
      if (opt_.induction && !sub_.empty())
        if (CExprPtr e = focus(mk_cconst(self_), thm_type_, done, goal, depth,
                               true, blur))
          return e;
      // hypotheses, newest first
      for (auto it = done.rbegin(); it != done.rend(); ++it)
        if (CExprPtr e =
                focus(it->expr, it->type, done, goal, depth, false, blur))
          return e;
      if (blur) break;
      // computation constructors of the goal's head type
      if (goal->kind == CompType::Atomic) {
        if (const CompTypeDecl* d = sig_.ctype(goal->name))
          for (auto& cn : d->ctors)
            if (CExprPtr e = focus(mk_cconst(cn), sig_.comp_const(cn)->type,
                                   done, goal, depth, false, blur))
              return e;
      }
      // level rule: LF search on the box contents
      if (goal->kind == CompType::Box && depth > 0) {
        LFSearch lf(sig_, store_, delta_, menv_);
        if (auto t = lf.prove(goal->cx, goal->head, opt_.depth))
          return mk_cbox(zonk_ctx(goal->cx, look()), *t);
      }
    }
    return nullptr;
  }

  CExprPtr focus(const CExprPtr& head, const CTypePtr& ty,
                 const std::vector<Hyp>& done, const CTypePtr& goal, int depth,
                 bool is_ih, bool blur_mode) {
    size_t m = store_.mark();
    MetaCtx saved_delta = delta_;
    struct Arg {
      bool is_meta;
      MetaTerm carg;
      CTypePtr prem;
    };
    std::vector<Arg> args;
    CTypePtr t = zonk_ctype(ty, look());
    int expl = 0, ih_arg = -1;
    std::string ih_meta;
    while (true) {
      if (t->kind == CompType::PiBox) {
        std::string u = fresh_exist();
        MetaType uty = zonk_metatype(t->u, look());
        menv_[u] = uty;
        MetaTerm occ = meta_occurrence(u, uty);
        args.push_back(Arg{true, occ, nullptr});
        if (!t->implicit && ++expl == ind_pos0() && is_ih) ih_meta = u;
        MetaSubst th;
        th[t->name] = occ;
        t = zonk_ctype(apply_msubst(th, t->body), look());
        continue;
      }
      if (t->kind == CompType::Arrow) {
        args.push_back(Arg{false, MetaTerm{}, t->left});
        if (++expl == ind_pos0() && is_ih) ih_arg = (int)args.size() - 1;
        t = t->right;
        continue;
      }
      break;
    }
    t = zonk_ctype(t, look());
#ifdef BLF_TRACE
    fprintf(stderr, "[cs]  focus%s d=%d end %s\n", is_ih ? " IH" : "", depth,
            Printer(&sig_).ctype(t).c_str());
#endif
    // Two closure modes. Direct: unify the end with the goal. Blur: unbox a
    // box-typed end into the context and keep driving; it applies to any
    // goal, and for a box goal it is a second attempt after the direct one
    // (direct unification may succeed yet a later step — premises, the
    // strict-subterm guard — fail where the blurred hypothesis still helps).
    auto attempt_once = [&](bool blur, int ih_skip,
                            bool* ih_used) -> CExprPtr {
      size_t ma = store_.mark();
      MetaCtx saved = delta_;
      auto fail = [&]() -> CExprPtr {
        store_.undo_to(ma);
        delta_ = saved;
        return nullptr;
      };
      if (!blur && rigid_unifier().ctype(t, goal) != UnifyResult::Solved)
        return fail();
      if (is_ih && !ih_meta.empty() && !strict_subterm(mk_mvar(ih_meta)))
        return fail();
      // premises, left to right, each with the remaining budget; the
      // induction-position premise is filled from the strict subterms
      // directly so general search cannot pre-empt it with an assumption
      // that later fails the termination guard
      std::vector<CExprPtr> sols(args.size());
      for (size_t i = 0; i < args.size(); i++) {
        if (args[i].is_meta) continue;
        if (is_ih && (int)i == ih_arg) {
          sols[i] = ih_argument(zonk_ctype(args[i].prem, look()), ih_skip);
          if (!sols[i]) return fail();
          *ih_used = true;
          continue;
        }
        sols[i] =
            solve_premise(zonk_ctype(args[i].prem, look()), done, depth - 1);
        if (!sols[i]) return fail();
      }
      // ground check: quantifier arguments must be determined. For blur,
      // the check runs after the continuation — using the unboxed
      // conclusion against the goal may pin down quantifiers the premises
      // left open (e.g. an index that only the goal mentions).
      auto args_ground = [&]() {
        for (auto& a : args)
          if (a.is_meta && !ground(zonk_term(a.carg.term, look())))
            return false;
        return true;
      };
      if (!blur && !args_ground()) return fail();
      CExprPtr e = head;
      for (size_t i = 0; i < args.size(); i++)
        e = args[i].is_meta ? mk_cmapp(e, args[i].carg) : mk_capp(e, sols[i]);
      if (blur) {
        CTypePtr bt = zonk_ctype(t, look());
        // pointless if the unboxed content is already an assumption
        if (bt->kind == CompType::Box)
          for (auto& dcl : delta_) {
            if (dcl.type.kind != MetaType::Box) continue;
            MetaType u = zonk_metatype(dcl.type, look());
            if (equal_ctx(u.cx, bt->cx) && equal_type(u.head, bt->head))
              return fail();
          }
        CExprPtr e2 = drive({Hyp{"", bt, e}}, done, goal,
                            depth - 1, /*top=*/false, /*allow_split=*/false,
                            "");
        if (!e2 || !args_ground()) return fail();
        return e2;
      }
      return e;
    };
    // enumerate the induction-argument choice: a failure after consuming
    // the k-th strict-subterm candidate retries with the next one
    auto attempt = [&](bool blur) -> CExprPtr {
      for (int skip = 0;; skip++) {
        bool ih_used = false;
        if (CExprPtr e = attempt_once(blur, skip, &ih_used)) return e;
        // no candidate consumed: either exhausted or the failure was not
        // tied to that choice; retrying cannot help
        if (!ih_used) return nullptr;
      }
    };
    if (!blur_mode) {
      if (goal->kind == t->kind &&
          (t->kind == CompType::Atomic || t->kind == CompType::Box))
        if (CExprPtr e = attempt(false)) return e;
    } else if (t->kind == CompType::Box) {
      if (CExprPtr e = attempt(true)) return e;
    }
    return fail_focus(m, saved_delta);
  }

  int ind_pos0() const { return opt_.induction ? *opt_.induction : -1; }

  // A recursive call's induction argument must be a strict subterm of the
  // split variable, so only those are candidates (newest first); `skip`
  // selects among the ones whose type unifies with the premise.
  CExprPtr ih_argument(const CTypePtr& prem, int skip) {
    if (prem->kind != CompType::Box) return nullptr;
    for (auto it = delta_.rbegin(); it != delta_.rend(); ++it) {
      if (!sub_.count(it->name) || it->type.kind != MetaType::Box) continue;
      size_t m = store_.mark();
      MetaType u = zonk_metatype(it->type, look());
      if (rigid_unifier().ctype(mk_ctbox(u.cx, u.head), prem) ==
          UnifyResult::Solved) {
        if (skip-- == 0) {
          TermPtr occ = u.cx.decls.empty() ? mk_mvar(it->name)
                                           : mk_mvar(it->name, id_subst(u.cx));
          return mk_cbox(u.cx, occ);
        }
      }
      store_.undo_to(m);
    }
    return nullptr;
  }

  CExprPtr fail_focus(size_t m, MetaCtx& saved) {
    store_.undo_to(m);
    delta_ = saved;
    return nullptr;
  }

  bool strict_subterm(const TermPtr& t0) {
    TermPtr t = zonk_term(t0, look());
    return !t->is_lam() && t->head.kind == Head::MVar && t->spine.empty() &&
           sub_.count(t->head.name);
  }

  static bool ground(const TermPtr& t) {
    if (t->is_lam()) return ground(t->lam_body);
    if (t->head.kind == Head::MVar && exist_flex(t->head.name)) return false;
    for (auto& e : t->head.sub.entries)
      if (!ground(e)) return false;
    for (auto& a : t->spine)
      if (!ground(a)) return false;
    return true;
  }

  // A premise is a fresh goal: peel its quantifiers and hypotheses, then
  // re-enter the uniform phase.
  //
  // Scope discipline: the solution becomes an argument subexpression, so any
  // fact it learns (say, by inverting a derived equation) holds only inside
  // it. A solution that refines a universal meta-variable that already
  // existed when the premise was entered would smuggle that fact into the
  // enclosing scope, where the emitted term cannot justify it; such
  // solutions are rejected.
  CExprPtr solve_premise(CTypePtr t, std::vector<Hyp> done, int depth) {
    size_t m0 = store_.mark();
    std::set<std::string> outer;
    for (auto& [n, u] : menv_)
      if (!exist_flex(n) && !store_.get(n)) outer.insert(n);
    premise_outer_.push_back(outer);
    MetaCtx saved_delta = delta_;
    std::vector<std::shared_ptr<CompExpr>> chain;
    std::vector<Hyp> pending;
    MetaSubst ren;
    while (true) {
      t = zonk_ctype(apply_msubst(ren, t), look());
      ren.clear();
      if (t->kind == CompType::PiBox) {
        std::string n = fresh_upper(t->name);
        MetaType uty = zonk_metatype(t->u, look());
        menv_[n] = uty;
        delta_.push_back(MetaDecl{n, uty});
        if (t->name != n) ren[t->name] = meta_occurrence(n, uty);
        auto lam = std::make_shared<CompExpr>();
        lam->kind = CompExpr::MLam;
        lam->name = n;
        chain.push_back(lam);
        t = t->body;
        continue;
      }
      if (t->kind == CompType::Arrow) {
        std::string n = fresh_lower();
        pending.push_back(Hyp{n, t->left, mk_cvar(n)});
        auto fn = std::make_shared<CompExpr>();
        fn->kind = CompExpr::Fn;
        fn->name = n;
        chain.push_back(fn);
        t = t->right;
        continue;
      }
      break;
    }
    CExprPtr body = drive(std::move(pending), std::move(done), t, depth,
                          /*top=*/false, /*allow_split=*/false, "");
    delta_ = std::move(saved_delta);  // binders go out of scope
    premise_outer_.pop_back();
    if (!body) return nullptr;
    // safety net behind the per-action guards
    for (size_t i = m0; i < store_.mark(); i++)
      if (outer.count(store_.trail_at(i))) {
        store_.undo_to(m0);
        return nullptr;
      }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      (*it)->e1 = body;
      body = *it;
    }
    return body;
  }

  // ------------------------------------------------------------ fingerprint

  // Canonical, name-insensitive rendering of the post-uniform state: used to
  // test that the invertible phase is deterministic up to renaming.
  std::string fingerprint(const std::vector<Hyp>& pending,
                          const std::vector<Hyp>& done, const CTypePtr& goal) {
    std::vector<std::string> items;
    for (auto& d : delta_) {
      if (store_.get(d.name)) continue;
      MetaType u = zonk_metatype(d.type, look());
      if (u.kind != MetaType::Box) continue;
      items.push_back("D " + canon_type(u.head));
    }
    for (auto& h : pending)
      items.push_back("G " + canon_ctype(zonk_ctype(h.type, look())));
    for (auto& h : done)
      items.push_back("G " + canon_ctype(zonk_ctype(h.type, look())));
    std::sort(items.begin(), items.end());
    std::string out;
    for (auto& i : items) out += i + ";";
    out += "goal " + canon_ctype(zonk_ctype(goal, look()));
    return out;
  }

  static std::string canon_term(const TermPtr& t) {
    if (t->is_lam()) return "\\" + canon_term(t->lam_body);
    std::string h;
    switch (t->head.kind) {
      case Head::Const: h = t->head.name; break;
      case Head::BVar: h = "#" + std::to_string(t->head.index); break;
      case Head::MVar: {
        h = "*";
        if (!t->head.sub.is_empty()) {
          h += "[";
          for (auto& e : t->head.sub.entries) h += canon_term(e) + ",";
          h += "]";
        }
        break;
      }
    }
    std::string s = "(" + h;
    for (auto& a : t->spine) s += " " + canon_term(a);
    return s + ")";
  }
  static std::string canon_type(const TypePtr& a) {
    if (a->is_pi)
      return "{" + canon_type(a->dom) + "}" + canon_type(a->cod);
    std::string s = "(" + a->family;
    for (auto& t : a->args) s += " " + canon_term(t);
    return s + ")";
  }
  static std::string canon_ctype(const CTypePtr& t) {
    switch (t->kind) {
      case CompType::Box:
        return "[" + canon_type(t->head) + "]";
      case CompType::Arrow:
        return canon_ctype(t->left) + "->" + canon_ctype(t->right);
      case CompType::PiBox:
        return "{*:" +
               (t->u.kind == MetaType::Box ? canon_type(t->u.head)
                                           : t->u.schema) +
               "}" + canon_ctype(t->body);
      case CompType::Atomic: {
        std::string s = "(" + t->name;
        for (auto& a : t->args)
          if (a.kind == MetaTerm::Contextual) s += " " + canon_term(a.term);
        return s + ")";
      }
    }
    return "?";
  }
};

}  // namespace blf
