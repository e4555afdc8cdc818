#pragma once

// LF-level type checking: bidirectional checking of canonical terms against
// types, substitution typing, kinding of types, and context well-formedness.
// Operates on fully zonked objects; remaining meta-variables must be declared
// in the supplied meta-variable environment.

#include <functional>
#include <map>
#include <string>

#include "blf/ast.hpp"
#include "blf/print.hpp"
#include "blf/subst.hpp"

namespace blf {

using MetaTypeEnv = std::map<std::string, MetaType>;

class LFChecker {
 public:
  LFChecker(const Signature& sig, const MetaTypeEnv& delta)
      : sig_(sig), delta_(delta) {}

  // M <= A
  void check(const LFCtx& cx, const TermPtr& t, const TypePtr& a) const {
    if (a->is_pi) {
      if (t->is_lam()) {
        LFCtx cx2 = extend(cx, t->binder_hint, a->dom, a->param);
        check(cx2, t->lam_body, a->cod);
        return;
      }
      // neutral against Pi: eta-expand on the fly
      TermPtr body = push_var(t);
      LFCtx cx2 = extend(cx, "x", a->dom, a->param);
      check(cx2, body, a->cod);
      return;
    }
    if (t->is_lam())
      fail(cx, t, "lambda checked against atomic type " + pr().type(a, names(cx)));
    TypePtr got = infer_neutral(cx, t);
    if (!equal_type(got, a))
      fail(cx, t, "type mismatch: expected " + pr().type(a, names(cx)) +
                      ", found " + pr().type(got, names(cx)));
  }

  // neutral R => P
  TypePtr infer_neutral(const LFCtx& cx, const TermPtr& t) const {
    TypePtr head_ty = infer_head(cx, t->head);
    return check_spine(cx, t, head_ty, t->spine);
  }

  TypePtr infer_head(const LFCtx& cx, const Head& h) const {
    switch (h.kind) {
      case Head::Const: {
        if (auto* c = sig_.lf_const(h.name)) return c->type;
        if (auto* f = sig_.family(h.name)) return f->kind;
        throw Diag("undeclared constant '" + h.name + "'");
      }
      case Head::BVar: {
        int n = (int)cx.decls.size();
        if (h.index < 0 || h.index >= n)
          throw Diag("variable index out of scope");
        // declaration n-1-index, its type scoped over the preceding decls
        return shift_type(cx.decls[n - 1 - h.index].type, h.index + 1, 0);
      }
      case Head::MVar: {
        auto it = delta_.find(h.name);
        if (it == delta_.end())
          throw Diag("undeclared meta-variable '" + h.name + "'");
        if (it->second.kind != MetaType::Box)
          throw Diag("meta-variable '" + h.name + "' is not contextual");
        const MetaType& u = it->second;
        check_subst(cx, h.sub, u.cx);
        if (h.sub.is_empty()) return u.head;  // identity
        return apply_subst_type(h.sub, u.head);
      }
    }
    throw Diag("internal: bad head");
  }

  // Checks each spine argument against the successive Pi domains; returns the
  // fully instantiated atomic result type.
  TypePtr check_spine(const LFCtx& cx, const TermPtr& at, TypePtr head_ty,
                      const std::vector<TermPtr>& spine) const {
    for (auto& arg : spine) {
      if (!head_ty->is_pi)
        fail(cx, at, "too many arguments for head");
      check(cx, arg, head_ty->dom);
      head_ty = subst_top_type(head_ty->cod, arg);
    }
    return head_ty;
  }

  // s : cx => dom   (s maps dom's variables to terms over cx)
  void check_subst(const LFCtx& cx, const Subst& s, const LFCtx& dom) const {
    if (s.is_empty() && equal_ctx(cx, dom)) return;  // identity
    if (dom.var) {
      if (!s.wk || *s.wk != *dom.var || !cx.var || *cx.var != *dom.var)
        throw Diag("substitution does not cover context variable " + *dom.var);
    } else if (s.wk) {
      throw Diag("weakening substitution into a closed context");
    }
    if (s.entries.size() != dom.decls.size())
      throw Diag("substitution arity mismatch");
    for (size_t i = 0; i < dom.decls.size(); i++) {
      Subst prefix;
      prefix.wk = s.wk;
      prefix.entries.assign(s.entries.begin(), s.entries.begin() + (long)i);
      TypePtr expect = apply_subst_type(prefix, dom.decls[i].type);
      check(cx, s.entries[i], expect);
    }
  }

  // A <= type : kinding of a type in cx
  void check_type(const LFCtx& cx, const TypePtr& a) const {
    if (a->is_pi) {
      check_type(cx, a->dom);
      check_type(extend(cx, a->binder_hint, a->dom, a->param), a->cod);
      return;
    }
    const LFFamily* f = sig_.family(a->family);
    if (!f) throw Diag("undeclared type family '" + a->family + "'");
    TypePtr k = f->kind;
    for (auto& arg : a->args) {
      if (!k->is_pi) throw Diag("too many arguments to family " + a->family);
      check(cx, arg, k->dom);
      k = subst_top_type(k->cod, arg);
    }
    if (k->is_pi || k->family != "type")
      throw Diag("family " + a->family + " is not fully applied");
  }

  // Kinds: Pis over well-formed types ending in the pseudo-atom `type`.
  void check_kind(const TypePtr& k) const {
    LFCtx cx;
    TypePtr cur = k;
    while (cur->is_pi) {
      check_type(cx, cur->dom);
      cx = extend(cx, cur->binder_hint, cur->dom, cur->param);
      cur = cur->cod;
    }
    if (cur->family != "type" || !cur->args.empty())
      throw Diag("kind must end in 'type'");
  }

  void check_ctx(const LFCtx& cx) const {
    LFCtx prefix;
    prefix.var = cx.var;
    for (auto& d : cx.decls) {
      check_type(prefix, d.type);
      prefix.decls.push_back(d);
    }
  }

  static LFCtx extend(const LFCtx& cx, const std::string& name,
                      const TypePtr& ty, bool param) {
    LFCtx r = cx;
    r.decls.push_back(CtxDecl{name, ty, param});
    return r;
  }

 private:
  const Signature& sig_;
  const MetaTypeEnv& delta_;

  Printer pr() const { return Printer(&sig_); }
  static std::vector<std::string> names(const LFCtx& cx) {
    std::vector<std::string> v;
    for (auto& d : cx.decls) v.push_back(d.name);
    return v;
  }
  [[noreturn]] void fail(const LFCtx& cx, const TermPtr& t,
                         const std::string& msg) const {
    throw Diag(msg + " (in " + pr().term(t, names(cx)) + ")");
  }

  // shift a neutral under one binder and apply it to that binder's variable
  static TermPtr push_var(const TermPtr& t) {
    TermPtr s = shift_term(t, 1, 0);
    std::vector<TermPtr> sp = s->spine;
    sp.push_back(mk_bvar(0));
    return mk_neutral(s->head, std::move(sp));
  }
};

// Convenience wrappers.
inline void lf_check(const Signature& sig, const MetaTypeEnv& delta,
                     const LFCtx& cx, const TermPtr& t, const TypePtr& a) {
  LFChecker(sig, delta).check(cx, t, a);
}
inline TypePtr lf_infer(const Signature& sig, const MetaTypeEnv& delta,
                        const LFCtx& cx, const TermPtr& t) {
  return LFChecker(sig, delta).infer_neutral(cx, t);
}
inline void lf_check_type(const Signature& sig, const MetaTypeEnv& delta,
                          const LFCtx& cx, const TypePtr& a) {
  LFChecker(sig, delta).check_type(cx, a);
}

inline MetaTypeEnv env_of(const MetaCtx& delta) {
  MetaTypeEnv e;
  for (auto& d : delta) e[d.name] = d.type;
  return e;
}

}  // namespace blf
