#pragma once

// Alpha-equality over proof expressions and whole scripts, used to compare
// an emitted script against a reference. Names are matched up to a
// consistent (injective) renaming: statement quantifiers are paired
// positionally, binders (let-box, mlam, fn, pattern variables) pair as they
// are crossed, and any other meta-variable pairs with the first counterpart
// it is seen against. LF binders are de Bruijn so they compare structurally.
//
// When a signature is supplied, implicit argument positions of constants and
// type families are skipped: scripts written by hand leave them to the
// checker while emitted ones spell them out, and either way their content is
// determined by the explicit arguments. Type ascriptions on inversion lets
// are printing sugar and are ignored.

#include <map>
#include <list>
#include <set>
#include <string>

#include "blf/ast.hpp"

namespace blf {

class AlphaCmp {
 public:
  explicit AlphaCmp(const Signature* sig = nullptr) : sig_(sig) {}

  // Pre-seed a correspondence (e.g. statement quantifiers).
  void pair_meta(const std::string& a, const std::string& b) {
    mv_[a] = b;
    mvt_.insert(b);
  }
  void pair_var(const std::string& a, const std::string& b) {
    cv_[a] = b;
    cvt_.insert(b);
  }

  bool term(const TermPtr& a, const TermPtr& b) {
    if (a->is_lam() != b->is_lam()) return false;
    if (a->is_lam()) return term(a->lam_body, b->lam_body);
    if (a->head.kind != b->head.kind) return false;
    size_t skip = 0;
    switch (a->head.kind) {
      case Head::Const:
        if (a->head.name != b->head.name) return false;
        if (sig_)
          if (const LFConst* c = sig_->lf_const(a->head.name))
            skip = (size_t)c->implicits;
        break;
      case Head::BVar:
        if (a->head.index != b->head.index) return false;
        break;
      case Head::MVar:
        if (!meta_eq(a->head.name, b->head.name)) return false;
        if (!sub(a->head.sub, b->head.sub)) return false;
        break;
    }
    if (a->spine.size() != b->spine.size()) return false;
    for (size_t i = skip; i < a->spine.size(); i++)
      if (!term(a->spine[i], b->spine[i])) return false;
    return true;
  }

  bool type(const TypePtr& a, const TypePtr& b) {
    if (a->is_pi != b->is_pi) return false;
    if (a->is_pi)
      return a->param == b->param && type(a->dom, b->dom) &&
             type(a->cod, b->cod);
    if (a->family != b->family || a->args.size() != b->args.size())
      return false;
    size_t skip = 0;
    if (sig_)
      if (const LFFamily* f = sig_->family(a->family))
        skip = (size_t)f->implicits;
    for (size_t i = skip; i < a->args.size(); i++)
      if (!term(a->args[i], b->args[i])) return false;
    return true;
  }

  bool ctx(const LFCtx& a, const LFCtx& b) {
    if (a.var != b.var || a.decls.size() != b.decls.size()) return false;
    for (size_t i = 0; i < a.decls.size(); i++)
      if (!type(a.decls[i].type, b.decls[i].type)) return false;
    return true;
  }

  bool metatype(const MetaType& a, const MetaType& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == MetaType::Schema) return a.schema == b.schema;
    return ctx(a.cx, b.cx) && type(a.head, b.head);
  }

  bool metaterm(const MetaTerm& a, const MetaTerm& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == MetaTerm::Ctx) return ctx(a.ctxval, b.ctxval);
    return ctx(a.cx, b.cx) && term(a.term, b.term);
  }

  bool ctype(const CTypePtr& a, const CTypePtr& b) {
    if (a->kind != b->kind) return false;
    switch (a->kind) {
      case CompType::Box:
        return ctx(a->cx, b->cx) && type(a->head, b->head);
      case CompType::Arrow:
        return ctype(a->left, b->left) && ctype(a->right, b->right);
      case CompType::PiBox: {
        if (!metatype(a->u, b->u)) return false;
        ScopedMeta bind(*this, a->name, b->name);
        return ctype(a->body, b->body);
      }
      case CompType::Atomic: {
        if (a->name != b->name || a->args.size() != b->args.size())
          return false;
        for (size_t i = 0; i < a->args.size(); i++)
          if (!metaterm(a->args[i], b->args[i])) return false;
        return true;
      }
    }
    return false;
  }

  bool expr(const CExprPtr& a, const CExprPtr& b) {
    if (!a || !b) return a == b;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
      case CompExpr::Var: {
        auto it = cv_.find(a->name);
        if (it != cv_.end()) return it->second == b->name;
        if (cvt_.count(b->name)) return false;
        pair_var(a->name, b->name);
        return true;
      }
      case CompExpr::ConstRef:
        return a->name == b->name;
      case CompExpr::BoxI:
        return ctx(a->cx, b->cx) && term(a->term, b->term);
      case CompExpr::LetBox: {
        if (!expr(a->e1, b->e1)) return false;
        ScopedMeta bind(*this, a->name, b->name);
        return expr(a->e2, b->e2);
      }
      case CompExpr::Fn: {
        ScopedVar bind(*this, a->name, b->name);
        return expr(a->e1, b->e1);
      }
      case CompExpr::App:
        return expr(a->e1, b->e1) && expr(a->e2, b->e2);
      case CompExpr::MLam: {
        ScopedMeta bind(*this, a->name, b->name);
        return expr(a->e1, b->e1);
      }
      case CompExpr::MApp:
        return expr(a->e1, b->e1) && metaterm(a->carg, b->carg);
      case CompExpr::CaseMeta: {
        if (!expr(a->scrut, b->scrut)) return false;
        if (a->mbranches.size() != b->mbranches.size()) return false;
        for (auto& br : a->mbranches) {
          const MetaBranch* other = nullptr;
          for (auto& bb : b->mbranches)
            if (head_ctor(bb.pat) == head_ctor(br.pat)) other = &bb;
          if (!other) return false;
          if (br.pat_vars.size() != other->pat_vars.size()) return false;
          std::list<ScopedMeta> binds;
          for (size_t i = 0; i < br.pat_vars.size(); i++)
            binds.emplace_back(*this, br.pat_vars[i].first,
                               other->pat_vars[i].first);
          if (!term(br.pat, other->pat)) return false;
          if (!expr(br.body, other->body)) return false;
        }
        return true;
      }
      case CompExpr::CaseComp: {
        if (!expr(a->scrut, b->scrut)) return false;
        if (a->cbranches.size() != b->cbranches.size()) return false;
        for (auto& br : a->cbranches) {
          const CompBranch* other = nullptr;
          for (auto& bb : b->cbranches)
            if (bb.ctor == br.ctor) other = &bb;
          if (!other) return false;
          if (br.args.size() != other->args.size()) return false;
          // branch argument names bind either meta or computation variables;
          // recording both is harmless since the namespaces are disjoint
          std::list<ScopedMeta> mbinds;
          std::list<ScopedVar> vbinds;
          for (size_t i = 0; i < br.args.size(); i++) {
            mbinds.emplace_back(*this, br.args[i], other->args[i]);
            vbinds.emplace_back(*this, br.args[i], other->args[i]);
          }
          if (!expr(br.body, other->body)) return false;
        }
        return true;
      }
      case CompExpr::Hole:
        return true;  // holes are equal regardless of label
    }
    return false;
  }

 private:
  const Signature* sig_;
  std::map<std::string, std::string> mv_, cv_;  // left name -> right name
  std::set<std::string> mvt_, cvt_;             // right names already taken

  // Binder scope: shadows any outer pairing of the same name and restores it
  // on exit. Pairings created for free names inside the scope persist.
  struct ScopedMeta {
    AlphaCmp& c;
    std::string a, b;
    std::optional<std::string> prev;
    bool had_target;
    ScopedMeta(AlphaCmp& c, std::string a_, std::string b_)
        : c(c), a(std::move(a_)), b(std::move(b_)) {
      auto it = c.mv_.find(a);
      if (it != c.mv_.end()) prev = it->second;
      had_target = c.mvt_.count(b) > 0;
      c.mv_[a] = b;
      c.mvt_.insert(b);
    }
    ~ScopedMeta() {
      if (prev)
        c.mv_[a] = *prev;
      else
        c.mv_.erase(a);
      if (!had_target) c.mvt_.erase(b);
    }
    ScopedMeta(ScopedMeta&&) = delete;
  };
  struct ScopedVar {
    AlphaCmp& c;
    std::string a, b;
    std::optional<std::string> prev;
    bool had_target;
    ScopedVar(AlphaCmp& c, std::string a_, std::string b_)
        : c(c), a(std::move(a_)), b(std::move(b_)) {
      auto it = c.cv_.find(a);
      if (it != c.cv_.end()) prev = it->second;
      had_target = c.cvt_.count(b) > 0;
      c.cv_[a] = b;
      c.cvt_.insert(b);
    }
    ~ScopedVar() {
      if (prev)
        c.cv_[a] = *prev;
      else
        c.cv_.erase(a);
      if (!had_target) c.cvt_.erase(b);
    }
    ScopedVar(ScopedVar&&) = delete;
  };

  bool meta_eq(const std::string& a, const std::string& b) {
    auto it = mv_.find(a);
    if (it != mv_.end()) return it->second == b;
    if (mvt_.count(b)) return false;
    pair_meta(a, b);
    return true;
  }
  bool sub(const Subst& a, const Subst& b) {
    if (a.wk != b.wk || a.entries.size() != b.entries.size()) return false;
    for (size_t i = 0; i < a.entries.size(); i++)
      if (!term(a.entries[i], b.entries[i])) return false;
    return true;
  }
  static std::string head_ctor(const TermPtr& pat) {
    return pat->is_lam() || pat->head.kind != Head::Const ? "" : pat->head.name;
  }
};

inline bool alpha_equal_cexpr(const Signature& sig, const CExprPtr& a,
                              const CExprPtr& b) {
  return AlphaCmp(&sig).expr(a, b);
}

// Whole-script comparison: the statements must agree up to quantifier
// renaming, and the solve terms up to that correspondence plus consistent
// renaming of the hypothesis names.
inline bool alpha_equal_script(const Signature& sig, const ProofScript& a,
                               const ProofScript& b) {
  if (a.totality != b.totality) return false;
  if (a.delta.size() != b.delta.size() || a.gamma.size() != b.gamma.size())
    return false;
  AlphaCmp cmp(&sig);
  for (size_t i = 0; i < a.delta.size(); i++) {
    if (!cmp.metatype(a.delta[i].type, b.delta[i].type)) return false;
    cmp.pair_meta(a.delta[i].name, b.delta[i].name);
  }
  for (size_t i = 0; i < a.gamma.size(); i++) {
    if (!cmp.ctype(a.gamma[i].second, b.gamma[i].second)) return false;
    cmp.pair_var(a.gamma[i].first, b.gamma[i].first);
  }
  return cmp.ctype(a.type, b.type) && cmp.expr(a.solve, b.solve);
}

}  // namespace blf
