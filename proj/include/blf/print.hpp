#pragma once

// Pretty printer. Output uses the same surface syntax the parser accepts, so
// printed objects round-trip. Implicit arguments (leading implicit binders of
// constants and their instantiations at use sites) are suppressed.

#include <sstream>
#include <string>
#include <vector>

#include "blf/ast.hpp"
#include "blf/subst.hpp"

namespace blf {

class Printer {
 public:
  explicit Printer(const Signature* sig = nullptr) : sig_(sig) {}

  std::string term(const TermPtr& t, std::vector<std::string> env = {}) const {
    std::ostringstream os;
    pr_term(os, t, env, false);
    return os.str();
  }
  std::string type(const TypePtr& a, std::vector<std::string> env = {}) const {
    std::ostringstream os;
    pr_type(os, a, env, false);
    return os.str();
  }
  std::string metatype(const MetaType& u) const {
    std::ostringstream os;
    pr_metatype(os, u);
    return os.str();
  }
  std::string metaterm(const MetaTerm& c) const {
    std::ostringstream os;
    pr_metaterm(os, c);
    return os.str();
  }
  std::string ctype(const CTypePtr& t) const {
    std::ostringstream os;
    pr_ctype(os, t, false);
    return os.str();
  }
  std::string cexpr(const CExprPtr& e, int indent = 0) const {
    std::ostringstream os;
    pr_cexpr(os, e, indent, false);
    return os.str();
  }
  std::string script(const ProofScript& s) const;
  std::string signature(const Signature& s) const;

 private:
  const Signature* sig_;

  int const_implicits(const std::string& c) const {
    if (!sig_) return 0;
    if (auto* k = sig_->lf_const(c)) return k->implicits;
    return 0;
  }
  int family_implicits(const std::string& f) const {
    if (!sig_) return 0;
    if (auto* k = sig_->family(f)) return k->implicits;
    return 0;
  }
  int cconst_implicits(const std::string& c) const {
    if (!sig_) return 0;
    if (auto* k = sig_->comp_const(c)) return k->implicits;
    return 0;
  }

  static std::string bvar_name(const std::vector<std::string>& env, int i) {
    int k = (int)env.size() - 1 - i;
    if (k < 0 || k >= (int)env.size()) return "#" + std::to_string(i);
    return env[k];
  }
  static std::string fresh(std::vector<std::string>& env, std::string hint) {
    if (hint.empty() || hint == "_") hint = "x";
    std::string n = hint;
    int c = 0;
    auto used = [&](const std::string& s) {
      for (auto& e : env)
        if (e == s) return true;
      return false;
    };
    while (used(n)) n = hint + std::to_string(++c);
    return n;
  }

  void pr_term(std::ostringstream& os, const TermPtr& t,
               std::vector<std::string> env, bool atomic) const {
    if (t->is_lam()) {
      if (atomic) os << '(';
      std::string x = fresh(env, t->binder_hint);
      os << '\\' << x << ". ";
      env.push_back(x);
      pr_term(os, t->lam_body, env, false);
      if (atomic) os << ')';
      return;
    }
    size_t skip = 0;
    std::string head;
    switch (t->head.kind) {
      case Head::Const:
        head = t->head.name;
        skip = (size_t)const_implicits(t->head.name);
        break;
      case Head::BVar:
        head = bvar_name(env, t->head.index);
        break;
      case Head::MVar: {
        head = t->head.name;
        if (!t->head.sub.entries.empty()) {
          std::ostringstream sb;
          sb << t->head.name << '[';
          for (size_t i = 0; i < t->head.sub.entries.size(); i++) {
            if (i) sb << ", ";
            pr_term(sb, t->head.sub.entries[i], env, false);
          }
          sb << ']';
          head = sb.str();
        }
        break;
      }
    }
    if (skip > t->spine.size()) skip = t->spine.size();
    bool has_args = t->spine.size() > skip;
    if (atomic && has_args) os << '(';
    os << head;
    for (size_t i = skip; i < t->spine.size(); i++) {
      os << ' ';
      pr_term(os, t->spine[i], env, true);
    }
    if (atomic && has_args) os << ')';
  }

  void pr_type(std::ostringstream& os, const TypePtr& a,
               std::vector<std::string> env, bool atomic) const {
    if (a->is_pi) {
      if (atomic) os << '(';
      if (a->param) {
        std::string x = fresh(env, a->binder_hint);
        os << '{' << x << " : ";
        pr_type(os, a->dom, env, false);
        os << "} ";
        env.push_back(x);
        pr_type(os, a->cod, env, false);
      } else {
        pr_type(os, a->dom, env, a->dom->is_pi);
        os << " -> ";
        env.push_back("_");
        pr_type(os, a->cod, env, false);
      }
      if (atomic) os << ')';
      return;
    }
    size_t skip = (size_t)family_implicits(a->family);
    if (skip > a->args.size()) skip = a->args.size();
    bool has_args = a->args.size() > skip;
    if (atomic && has_args) os << '(';
    os << a->family;
    for (size_t i = skip; i < a->args.size(); i++) {
      os << ' ';
      pr_term(os, a->args[i], env, true);
    }
    if (atomic && has_args) os << ')';
  }

  std::vector<std::string> ctx_env(const LFCtx& cx) const {
    std::vector<std::string> env;
    for (auto& d : cx.decls) env.push_back(d.name);
    return env;
  }

  void pr_ctx(std::ostringstream& os, const LFCtx& cx) const {
    bool first = true;
    if (cx.var) {
      os << *cx.var;
      first = false;
    }
    std::vector<std::string> env;
    for (auto& d : cx.decls) {
      if (!first) os << ", ";
      first = false;
      os << d.name;
      if (d.type) {
        os << " : ";
        pr_type(os, d.type, env, false);
      }
      env.push_back(d.name);
    }
  }

  void pr_metatype(std::ostringstream& os, const MetaType& u) const {
    if (u.kind == MetaType::Schema) {
      os << u.schema;
      return;
    }
    os << '[';
    pr_ctx(os, u.cx);
    os << " |- ";
    pr_type(os, u.head, ctx_env(u.cx), false);
    os << ']';
  }

  void pr_metaterm(std::ostringstream& os, const MetaTerm& c) const {
    if (c.kind == MetaTerm::Ctx) {
      os << '[';
      pr_ctx(os, c.ctxval);
      os << ']';
      return;
    }
    os << '[';
    pr_ctx(os, c.cx);
    os << " |- ";
    pr_term(os, c.term, ctx_env(c.cx), false);
    os << ']';
  }

  void pr_ctype(std::ostringstream& os, const CTypePtr& t, bool atomic) const {
    switch (t->kind) {
      case CompType::Box: {
        os << '[';
        pr_ctx(os, t->cx);
        os << " |- ";
        pr_type(os, t->head, ctx_env(t->cx), false);
        os << ']';
        return;
      }
      case CompType::Arrow: {
        if (atomic) os << '(';
        pr_ctype(os, t->left, t->left->kind == CompType::Arrow ||
                                  t->left->kind == CompType::PiBox ||
                                  t->left->kind == CompType::Atomic);
        os << " -> ";
        pr_ctype(os, t->right, false);
        if (atomic) os << ')';
        return;
      }
      case CompType::PiBox: {
        if (t->implicit) {  // suppressed; body still mentions the name
          pr_ctype(os, t->body, atomic);
          return;
        }
        if (atomic) os << '(';
        os << '{' << t->name << " : ";
        if (t->u.kind == MetaType::Box) {
          os << '[';
          pr_ctx(os, t->u.cx);
          os << " |- ";
          pr_type(os, t->u.head, ctx_env(t->u.cx), false);
          os << ']';
        } else {
          os << t->u.schema;
        }
        os << "} ";
        pr_ctype(os, t->body, false);
        if (atomic) os << ')';
        return;
      }
      case CompType::Atomic: {
        bool has_args = !t->args.empty();
        if (atomic && has_args) os << '(';
        os << t->name;
        for (auto& a : t->args) {
          os << ' ';
          pr_metaterm(os, a);
        }
        if (atomic && has_args) os << ')';
        return;
      }
    }
  }

  static void nl(std::ostringstream& os, int indent) {
    os << '\n';
    for (int i = 0; i < indent; i++) os << ' ';
  }

  void pr_pattern(std::ostringstream& os, const MetaBranch& b) const {
    os << "[ |- ";
    pr_term(os, b.pat, {}, false);
    os << ']';
  }

  void pr_cexpr(std::ostringstream& os, const CExprPtr& e, int ind,
                bool atomic) const {
    switch (e->kind) {
      case CompExpr::Var:
      case CompExpr::ConstRef:
        os << e->name;
        return;
      case CompExpr::Hole:
        os << '?' << e->name;
        return;
      case CompExpr::BoxI: {
        os << '[';
        pr_ctx(os, e->cx);
        os << " |- ";
        pr_term(os, e->term, ctx_env(e->cx), false);
        os << ']';
        return;
      }
      case CompExpr::Fn: {
        if (atomic) os << '(';
        os << "fn " << e->name;
        const CompExpr* cur = e->e1.get();
        CExprPtr body = e->e1;
        while (cur->kind == CompExpr::Fn) {
          os << ", " << cur->name;
          body = cur->e1;
          cur = body.get();
        }
        os << " => ";
        pr_cexpr(os, body, ind, false);
        if (atomic) os << ')';
        return;
      }
      case CompExpr::MLam: {
        if (atomic) os << '(';
        os << "mlam " << e->name << " => ";
        pr_cexpr(os, e->e1, ind, false);
        if (atomic) os << ')';
        return;
      }
      case CompExpr::App: {
        if (atomic) os << '(';
        pr_cexpr(os, e->e1, ind, e->e1->kind != CompExpr::App &&
                                      e->e1->kind != CompExpr::MApp);
        os << ' ';
        pr_cexpr(os, e->e2, ind, true);
        if (atomic) os << ')';
        return;
      }
      case CompExpr::MApp: {
        if (atomic) os << '(';
        pr_cexpr(os, e->e1, ind, e->e1->kind != CompExpr::App &&
                                      e->e1->kind != CompExpr::MApp);
        os << ' ';
        pr_metaterm(os, e->carg);
        if (atomic) os << ')';
        return;
      }
      case CompExpr::LetBox: {
        if (atomic) os << '(';
        os << "let [ |- " << e->name << "] = ";
        pr_cexpr(os, e->e1, ind, false);
        os << " in";
        nl(os, ind);
        pr_cexpr(os, e->e2, ind, false);
        if (atomic) os << ')';
        return;
      }
      case CompExpr::CaseMeta: {
        if (e->mbranches.empty()) {
          os << "impossible ";
          pr_cexpr(os, e->scrut, ind, true);
          return;
        }
        if (e->is_let && e->mbranches.size() == 1) {
          if (atomic) os << '(';
          const MetaBranch& b = e->mbranches[0];
          os << "let ";
          if (e->ascription) {
            os << '(';
            pr_pattern(os, b);
            os << " : ";
            pr_ctype(os, e->ascription, false);
            os << ')';
          } else {
            pr_pattern(os, b);
          }
          os << " = ";
          pr_cexpr(os, e->scrut, ind, false);
          os << " in";
          nl(os, ind);
          pr_cexpr(os, b.body, ind, false);
          if (atomic) os << ')';
          return;
        }
        if (atomic) os << '(';
        os << "case ";
        pr_cexpr(os, e->scrut, ind, true);
        os << " of";
        for (auto& b : e->mbranches) {
          nl(os, ind);
          os << "| ";
          pr_pattern(os, b);
          os << " =>";
          nl(os, ind + 2);
          pr_cexpr(os, b.body, ind + 2, false);
        }
        if (atomic) os << ')';
        return;
      }
      case CompExpr::CaseComp: {
        if (e->cbranches.empty()) {
          os << "impossible ";
          pr_cexpr(os, e->scrut, ind, true);
          return;
        }
        if (e->is_let && e->cbranches.size() == 1) {
          if (atomic) os << '(';
          const CompBranch& b = e->cbranches[0];
          os << "let (" << b.ctor;
          for (auto& a : b.args) os << ' ' << a;
          if (e->ascription) {
            os << " : ";
            pr_ctype(os, e->ascription, false);
          }
          os << ") = ";
          pr_cexpr(os, e->scrut, ind, false);
          os << " in";
          nl(os, ind);
          pr_cexpr(os, b.body, ind, false);
          if (atomic) os << ')';
          return;
        }
        if (atomic) os << '(';
        os << "case ";
        pr_cexpr(os, e->scrut, ind, true);
        os << " of";
        for (auto& b : e->cbranches) {
          nl(os, ind);
          os << "| (" << b.ctor;
          for (auto& a : b.args) os << ' ' << a;
          os << ") =>";
          nl(os, ind + 2);
          pr_cexpr(os, b.body, ind + 2, false);
        }
        if (atomic) os << ')';
        return;
      }
    }
  }
};

inline std::string Printer::script(const ProofScript& s) const {
  std::ostringstream os;
  os << "proof " << s.theorem << " : ";
  pr_ctype(os, s.type, false);
  os << " =\n";
  if (s.totality) os << "/ total " << *s.totality << " /\n";
  os << "intros\n{ ";
  bool first = true;
  for (auto& d : s.delta) {
    if (!first) os << ", ";
    first = false;
    os << d.name << " : ";
    if (d.type.kind == MetaType::Box) {
      os << '(';
      pr_ctx(os, d.type.cx);
      os << " |- ";
      pr_type(os, d.type.head, ctx_env(d.type.cx), false);
      os << ')';
    } else {
      os << d.type.schema;
    }
  }
  os << "\n| ";
  first = true;
  for (auto& h : s.gamma) {
    if (!first) os << ", ";
    first = false;
    os << h.first << " : ";
    pr_ctype(os, h.second, false);
  }
  os << "\n; solve\n    ";
  pr_cexpr(os, s.solve, 4, false);
  os << " } ;\n";
  return os.str();
}

inline std::string Printer::signature(const Signature& s) const {
  std::ostringstream os;
  for (auto& f : s.families) {
    // suppress leading implicit binders; their names re-enter scope
    std::vector<std::string> env;
    TypePtr k = f.kind;
    for (int i = 0; i < f.implicits && k->is_pi; i++) {
      env.push_back(k->binder_hint);
      k = k->cod;
    }
    os << "LF " << f.name << " : ";
    pr_type(os, k, env, false);
    if (!f.ctors.empty()) {
      os << " =";
      for (auto& cn : f.ctors) {
        const LFConst* c = s.lf_const(cn);
        std::vector<std::string> cenv;
        TypePtr ct = c->type;
        for (int i = 0; i < c->implicits && ct->is_pi; i++) {
          cenv.push_back(ct->binder_hint);
          ct = ct->cod;
        }
        os << "\n| " << cn << " : ";
        pr_type(os, ct, cenv, false);
      }
    }
    os << " ;\n\n";
  }
  for (auto& ct : s.ctypes) {
    os << (ct.stratified ? "stratified " : "inductive ") << ct.name << " : ";
    for (auto& ix : ct.indices) {
      os << '{' << ix.first << " : ";
      pr_metatype(os, ix.second);
      os << "} ";
    }
    os << "ctype =";
    for (auto& cn : ct.ctors) {
      const CompConst* c = s.comp_const(cn);
      CTypePtr t = c->type;
      os << "\n| " << cn << " : ";
      pr_ctype(os, t, false);
    }
    os << " ;\n\n";
  }
  for (auto& t : s.theorems) {
    os << "theorem " << t.name << " : ";
    pr_ctype(os, t.type, false);
    if (t.totality) os << " / total " << *t.totality << " /";
    os << " ;\n\n";
  }
  return os.str();
}

// print() per the spec surface: dispatch helpers.
inline std::string print(const Signature& sig, const TermPtr& t) {
  return Printer(&sig).term(t);
}
inline std::string print(const Signature& sig, const TypePtr& a) {
  return Printer(&sig).type(a);
}
inline std::string print(const Signature& sig, const CTypePtr& t) {
  return Printer(&sig).ctype(t);
}
inline std::string print(const Signature& sig, const CExprPtr& e) {
  return Printer(&sig).cexpr(e);
}
inline std::string print(const Signature& sig, const ProofScript& s) {
  return Printer(&sig).script(s);
}

}  // namespace blf
