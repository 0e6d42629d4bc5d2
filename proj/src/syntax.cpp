#include "modan/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace modan {

bool constant_truthy(const Constant& c) {
  if (const bool* b = std::get_if<bool>(&c)) return *b;
  return true;  // every non-#f value counts as true
}

std::string render_constant(const Constant& c) {
  struct V {
    std::string operator()(int64_t n) const { return std::to_string(n); }
    std::string operator()(const std::string& s) const {
      std::string out = "\"";
      for (char ch : s) {
        if (ch == '"' || ch == '\\') out.push_back('\\');
        if (ch == '\n') {
          out += "\\n";
          continue;
        }
        out.push_back(ch);
      }
      out.push_back('"');
      return out;
    }
    std::string operator()(bool b) const { return b ? "#t" : "#f"; }
  };
  return std::visit(V{}, c);
}

const Module* Program::find_module(const std::string& name) const {
  for (const Module& m : modules)
    if (m.name == name) return &m;
  return nullptr;
}

bool Program::has_opaque_module() const {
  for (const Module& m : modules)
    if (!m.body) return true;
  return false;
}

namespace {

const std::map<std::string, int>& prim_table() {
  static const std::map<std::string, int> t = {
      {"int?", 1}, {"string?", 1}, {"bool?", 1}, {"proc?", 1}, {"not", 1},
      {"=", 2},    {"<", 2},       {"+", 2},     {"-", 2},     {"*", 2},
  };
  return t;
}

bool is_keyword(const std::string& s) {
  return s == "lambda" || s == "if" || s == "module" || s == "main" ||
         s == "opaque" || s == "->";
}

}  // namespace

bool is_primitive(const std::string& name) { return prim_table().count(name) > 0; }

int primitive_arity(const std::string& name) {
  auto it = prim_table().find(name);
  return it == prim_table().end() ? -1 : it->second;
}

// ---------------------------------------------------------------------------
// reader: text -> datum trees
// ---------------------------------------------------------------------------

namespace {

struct Datum {
  // Leaf when children is nullopt; then text/constant describe the atom.
  std::optional<std::vector<Datum>> children;
  std::string text;  // symbol spelling, for leaves
  std::optional<Constant> constant;
  SourceLoc loc;

  bool is_list() const { return children.has_value(); }
  bool is_symbol(const char* s) const {
    return !is_list() && !constant && text == s;
  }
};

struct Reader {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit Reader(const std::string& s) : src(s) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(line, col, msg);
  }

  bool eof() const { return pos >= src.size(); }
  char peek() const { return src[pos]; }
  char advance() {
    char c = src[pos++];
    if (c == '\n') {
      line++;
      col = 1;
    } else {
      col++;
    }
    return c;
  }

  void skip_space() {
    while (!eof()) {
      char c = peek();
      if (c == ';') {  // comment to end of line
        while (!eof() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  static bool symbol_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '(' &&
           c != ')' && c != '"' && c != ';';
  }

  Datum read_datum() {
    skip_space();
    if (eof()) fail("unexpected end of input");
    SourceLoc loc{line, col};
    char c = peek();
    if (c == '(') {
      advance();
      std::vector<Datum> kids;
      for (;;) {
        skip_space();
        if (eof()) throw SyntaxError(loc.line, loc.col, "unclosed '('");
        if (peek() == ')') {
          advance();
          break;
        }
        kids.push_back(read_datum());
      }
      Datum d;
      d.children = std::move(kids);
      d.loc = loc;
      return d;
    }
    if (c == ')') fail("unexpected ')'");
    if (c == '"') return read_string(loc);
    return read_atom(loc);
  }

  Datum read_string(SourceLoc loc) {
    advance();  // opening quote
    std::string out;
    for (;;) {
      if (eof()) throw SyntaxError(loc.line, loc.col, "unterminated string");
      char c = advance();
      if (c == '"') break;
      if (c == '\\') {
        if (eof()) throw SyntaxError(loc.line, loc.col, "unterminated string");
        char e = advance();
        if (e == 'n')
          out.push_back('\n');
        else if (e == '"' || e == '\\')
          out.push_back(e);
        else
          fail("unknown escape in string");
      } else {
        out.push_back(c);
      }
    }
    Datum d;
    d.constant = Constant{out};
    d.loc = loc;
    return d;
  }

  Datum read_atom(SourceLoc loc) {
    std::string tok;
    while (!eof() && symbol_char(peek())) tok.push_back(advance());
    if (tok.empty()) fail("empty token");
    Datum d;
    d.loc = loc;
    if (tok == "#t") {
      d.constant = Constant{true};
      return d;
    }
    if (tok == "#f") {
      d.constant = Constant{false};
      return d;
    }
    bool numeric = !tok.empty() && (std::isdigit(static_cast<unsigned char>(tok[0])) ||
                                    (tok[0] == '-' && tok.size() > 1 &&
                                     std::isdigit(static_cast<unsigned char>(tok[1]))));
    if (numeric) {
      for (size_t i = (tok[0] == '-' ? 1 : 0); i < tok.size(); i++)
        if (!std::isdigit(static_cast<unsigned char>(tok[i])))
          throw SyntaxError(loc.line, loc.col, "bad number: " + tok);
      try {
        d.constant = Constant{static_cast<int64_t>(std::stoll(tok))};
      } catch (const std::out_of_range&) {
        throw SyntaxError(loc.line, loc.col, "integer out of range: " + tok);
      }
      return d;
    }
    d.text = tok;
    return d;
  }
};

// ---------------------------------------------------------------------------
// datum trees -> AST
// ---------------------------------------------------------------------------

struct Builder {
  Program& prog;
  std::set<std::string> module_names;
  Party owner;

  ExprPtr mk(Expr e, SourceLoc loc, bool needs_site) {
    e.id = prog.next_node_id++;
    e.loc = loc;
    e.owner = owner;
    if (needs_site) {
      e.site = prog.next_site_id++;
      prog.site_locs[e.site] = loc;
    }
    return std::make_shared<Expr>(std::move(e));
  }

  ExprPtr build(const Datum& d, std::set<std::string>& bound) {
    if (!d.is_list()) {
      if (d.constant) return mk(Expr{Lit{*d.constant}}, d.loc, false);
      const std::string& s = d.text;
      if (is_keyword(s))
        throw SyntaxError(d.loc.line, d.loc.col, "'" + s + "' cannot be used as an expression");
      if (bound.count(s)) return mk(Expr{Var{s}}, d.loc, false);
      if (module_names.count(s)) return mk(Expr{ModRef{s}}, d.loc, false);
      if (is_primitive(s)) {
        if (primitive_arity(s) != 1)
          throw SyntaxError(d.loc.line, d.loc.col,
                            "primitive '" + s + "' must be applied to " +
                                std::to_string(primitive_arity(s)) + " arguments");
        return mk(Expr{PrimRef{s}}, d.loc, false);
      }
      return mk(Expr{Var{s}}, d.loc, false);  // unbound; well_formed reports it
    }

    const std::vector<Datum>& kids = *d.children;
    if (kids.empty()) throw SyntaxError(d.loc.line, d.loc.col, "empty form");

    const Datum& head = kids[0];
    if (head.is_symbol("lambda")) {
      if (kids.size() != 3 || !kids[1].is_list() || kids[1].children->size() != 1)
        throw SyntaxError(d.loc.line, d.loc.col, "malformed lambda, want (lambda (x) body)");
      const Datum& pd = (*kids[1].children)[0];
      if (pd.is_list() || pd.constant)
        throw SyntaxError(pd.loc.line, pd.loc.col, "lambda parameter must be a name");
      const std::string& param = pd.text;
      if (is_keyword(param) || is_primitive(param) || module_names.count(param))
        throw SyntaxError(pd.loc.line, pd.loc.col,
                          "lambda parameter '" + param + "' shadows a reserved name");
      bool fresh = bound.insert(param).second;
      ExprPtr body = build(kids[2], bound);
      if (fresh) bound.erase(param);
      return mk(Expr{Lam{param, body}}, d.loc, false);
    }
    if (head.is_symbol("if")) {
      if (kids.size() != 4)
        throw SyntaxError(d.loc.line, d.loc.col, "malformed if, want (if t a b)");
      ExprPtr t = build(kids[1], bound);
      ExprPtr a = build(kids[2], bound);
      ExprPtr b = build(kids[3], bound);
      return mk(Expr{If{t, a, b}}, d.loc, false);
    }
    if (!head.is_list() && !head.constant && is_primitive(head.text) &&
        !bound.count(head.text)) {
      int arity = primitive_arity(head.text);
      if (static_cast<int>(kids.size()) - 1 != arity)
        throw SyntaxError(d.loc.line, d.loc.col,
                          "primitive '" + head.text + "' takes " +
                              std::to_string(arity) + " argument(s)");
      Expr e{Prim{head.text, {}}};
      ExprPtr node = mk(std::move(e), d.loc, true);
      // Arguments get ids after the operator node, in textual order.
      std::vector<ExprPtr> args;
      for (size_t i = 1; i < kids.size(); i++) args.push_back(build(kids[i], bound));
      Prim& p = std::get<Prim>(const_cast<Expr*>(node.get())->node);
      p.args = std::move(args);
      return node;
    }
    if (kids.size() == 1) return build(kids[0], bound);  // nullary call notation
    if (kids.size() == 2) {
      Expr e{App{nullptr, nullptr}};
      ExprPtr node = mk(std::move(e), d.loc, true);
      ExprPtr fn = build(kids[0], bound);
      ExprPtr arg = build(kids[1], bound);
      App& a = std::get<App>(const_cast<Expr*>(node.get())->node);
      a.fn = fn;
      a.arg = arg;
      return node;
    }
    throw SyntaxError(d.loc.line, d.loc.col,
                      "applications are unary; write curried calls as ((f a) b)");
  }

  ContractPtr build_contract(const Datum& d) {
    if (d.is_list() && !d.children->empty() && (*d.children)[0].is_symbol("->")) {
      if (d.children->size() != 3)
        throw SyntaxError(d.loc.line, d.loc.col, "malformed contract, want (-> dom rng)");
      ContractPtr dom = build_contract((*d.children)[1]);
      ContractPtr rng = build_contract((*d.children)[2]);
      return std::make_shared<Contract>(Contract{FuncContract{dom, rng}, d.loc});
    }
    std::set<std::string> bound;
    ExprPtr pred = build(d, bound);
    return std::make_shared<Contract>(
        Contract{FlatContract{pred, unparse_expr(*pred)}, d.loc});
  }
};

}  // namespace

Program parse(const std::string& text) {
  Reader r(text);
  std::vector<Datum> forms;
  for (;;) {
    r.skip_space();
    if (r.eof()) break;
    forms.push_back(r.read_datum());
  }
  if (forms.empty()) throw SyntaxError(1, 1, "empty program");

  Program prog;
  Builder b{prog, {}, kMainParty};

  // First pass: module names (forward references are allowed).
  for (const Datum& f : forms) {
    if (!f.is_list() || f.children->empty()) {
      throw SyntaxError(f.loc.line, f.loc.col, "expected (module ...) or (main ...)");
    }
    const Datum& head = (*f.children)[0];
    if (head.is_symbol("module")) {
      if (f.children->size() != 4)
        throw SyntaxError(f.loc.line, f.loc.col,
                          "malformed module, want (module name contract body)");
      const Datum& nd = (*f.children)[1];
      if (nd.is_list() || nd.constant)
        throw SyntaxError(nd.loc.line, nd.loc.col, "module name must be a symbol");
      if (is_keyword(nd.text) || is_primitive(nd.text))
        throw SyntaxError(nd.loc.line, nd.loc.col,
                          "module name '" + nd.text + "' is reserved");
      if (!b.module_names.insert(nd.text).second) throw DuplicateModule(nd.text);
    } else if (!head.is_symbol("main")) {
      throw SyntaxError(f.loc.line, f.loc.col, "expected (module ...) or (main ...)");
    }
  }

  // Second pass: build modules and main.
  bool saw_main = false;
  for (const Datum& f : forms) {
    const Datum& head = (*f.children)[0];
    if (head.is_symbol("module")) {
      const std::string& name = (*f.children)[1].text;
      b.owner = name;
      ContractPtr contract = b.build_contract((*f.children)[2]);
      const Datum& body = (*f.children)[3];
      Module m;
      m.name = name;
      m.contract = contract;
      m.loc = f.loc;
      m.boundary_site = -static_cast<int>(prog.modules.size()) - 1;
      prog.site_locs[m.boundary_site] = f.loc;
      if (!body.is_symbol("opaque")) {
        std::set<std::string> bound;
        m.body = b.build(body, bound);
      }
      prog.modules.push_back(std::move(m));
    } else {
      if (saw_main) throw SyntaxError(f.loc.line, f.loc.col, "more than one (main ...)");
      if (f.children->size() != 2)
        throw SyntaxError(f.loc.line, f.loc.col, "malformed main, want (main expr)");
      saw_main = true;
      b.owner = kMainParty;
      std::set<std::string> bound;
      prog.main = b.build((*f.children)[1], bound);
    }
  }
  if (!saw_main) throw SyntaxError(1, 1, "program has no (main ...) form");
  return prog;
}

// ---------------------------------------------------------------------------
// printer
// ---------------------------------------------------------------------------

std::string unparse_expr(const Expr& e) {
  struct V {
    std::string operator()(const Var& v) const { return v.name; }
    std::string operator()(const Lit& l) const { return render_constant(l.value); }
    std::string operator()(const Lam& l) const {
      return "(lambda (" + l.param + ") " + unparse_expr(*l.body) + ")";
    }
    std::string operator()(const App& a) const {
      return "(" + unparse_expr(*a.fn) + " " + unparse_expr(*a.arg) + ")";
    }
    std::string operator()(const If& i) const {
      return "(if " + unparse_expr(*i.test) + " " + unparse_expr(*i.then_e) + " " +
             unparse_expr(*i.else_e) + ")";
    }
    std::string operator()(const Prim& p) const {
      std::string out = "(" + p.op;
      for (const ExprPtr& a : p.args) out += " " + unparse_expr(*a);
      return out + ")";
    }
    std::string operator()(const PrimRef& p) const { return p.op; }
    std::string operator()(const ModRef& m) const { return m.name; }
  };
  return std::visit(V{}, e.node);
}

std::string contract_text(const Contract& c) {
  if (const FlatContract* f = std::get_if<FlatContract>(&c.node)) return f->text;
  const FuncContract& fn = std::get<FuncContract>(c.node);
  return "(-> " + contract_text(*fn.dom) + " " + contract_text(*fn.rng) + ")";
}

std::string unparse(const Program& p) {
  std::ostringstream out;
  for (const Module& m : p.modules) {
    out << "(module " << m.name << " " << contract_text(*m.contract) << " ";
    out << (m.body ? unparse_expr(**m.body) : "opaque");
    out << ")\n";
  }
  out << "(main " << unparse_expr(*p.main) << ")\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// structural comparison
// ---------------------------------------------------------------------------

namespace {

int constant_cmp(const Constant& a, const Constant& b) {
  if (a.index() != b.index()) return a.index() < b.index() ? -1 : 1;
  if (a < b) return -1;
  return a == b ? 0 : 1;
}

template <typename T>
int cmp3(const T& a, const T& b) {
  if (a < b) return -1;
  return a == b ? 0 : 1;
}

}  // namespace

int expr_cmp(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index())
    return a.node.index() < b.node.index() ? -1 : 1;
  struct V {
    const Expr& other;
    int operator()(const Var& x) const { return cmp3(x.name, std::get<Var>(other.node).name); }
    int operator()(const Lit& x) const {
      return constant_cmp(x.value, std::get<Lit>(other.node).value);
    }
    int operator()(const Lam& x) const {
      const Lam& y = std::get<Lam>(other.node);
      if (int c = cmp3(x.param, y.param)) return c;
      return expr_cmp(*x.body, *y.body);
    }
    int operator()(const App& x) const {
      const App& y = std::get<App>(other.node);
      if (int c = expr_cmp(*x.fn, *y.fn)) return c;
      return expr_cmp(*x.arg, *y.arg);
    }
    int operator()(const If& x) const {
      const If& y = std::get<If>(other.node);
      if (int c = expr_cmp(*x.test, *y.test)) return c;
      if (int c = expr_cmp(*x.then_e, *y.then_e)) return c;
      return expr_cmp(*x.else_e, *y.else_e);
    }
    int operator()(const Prim& x) const {
      const Prim& y = std::get<Prim>(other.node);
      if (int c = cmp3(x.op, y.op)) return c;
      if (x.args.size() != y.args.size()) return x.args.size() < y.args.size() ? -1 : 1;
      for (size_t i = 0; i < x.args.size(); i++)
        if (int c = expr_cmp(*x.args[i], *y.args[i])) return c;
      return 0;
    }
    int operator()(const PrimRef& x) const {
      return cmp3(x.op, std::get<PrimRef>(other.node).op);
    }
    int operator()(const ModRef& x) const {
      return cmp3(x.name, std::get<ModRef>(other.node).name);
    }
  };
  return std::visit(V{b}, a.node);
}

int contract_cmp(const Contract& a, const Contract& b) {
  if (a.node.index() != b.node.index())
    return a.node.index() < b.node.index() ? -1 : 1;
  if (const FlatContract* fa = std::get_if<FlatContract>(&a.node)) {
    const FlatContract& fb = std::get<FlatContract>(b.node);
    return expr_cmp(*fa->pred, *fb.pred);
  }
  const FuncContract& xa = std::get<FuncContract>(a.node);
  const FuncContract& xb = std::get<FuncContract>(b.node);
  if (int c = contract_cmp(*xa.dom, *xb.dom)) return c;
  return contract_cmp(*xa.rng, *xb.rng);
}

bool program_equal(const Program& a, const Program& b) {
  if (a.modules.size() != b.modules.size()) return false;
  for (size_t i = 0; i < a.modules.size(); i++) {
    const Module& ma = a.modules[i];
    const Module& mb = b.modules[i];
    if (ma.name != mb.name) return false;
    if (!contract_equal(*ma.contract, *mb.contract)) return false;
    if (ma.body.has_value() != mb.body.has_value()) return false;
    if (ma.body && !expr_equal(**ma.body, **mb.body)) return false;
  }
  return expr_equal(*a.main, *b.main);
}

// ---------------------------------------------------------------------------
// well-formedness
// ---------------------------------------------------------------------------

std::string Diagnostic::to_string() const {
  std::ostringstream out;
  out << kind << ": " << detail;
  if (loc.line > 0) out << " at " << loc.line << ":" << loc.col;
  return out.str();
}

namespace {

struct WfCheck {
  const Program& prog;
  std::vector<Diagnostic>& diags;

  void expr(const Expr& e, std::set<std::string>& bound, int site) {
    int here = e.site >= 0 ? e.site : site;
    struct V {
      WfCheck& w;
      const Expr& e;
      std::set<std::string>& bound;
      int here;
      void operator()(const Var& v) const {
        if (!bound.count(v.name))
          w.diags.push_back({"UnboundVariable", v.name, here, e.loc});
      }
      void operator()(const Lit&) const {}
      void operator()(const Lam& l) const {
        bool fresh = bound.insert(l.param).second;
        w.expr(*l.body, bound, here);
        if (fresh) bound.erase(l.param);
      }
      void operator()(const App& a) const {
        w.expr(*a.fn, bound, here);
        w.expr(*a.arg, bound, here);
      }
      void operator()(const If& i) const {
        w.expr(*i.test, bound, here);
        w.expr(*i.then_e, bound, here);
        w.expr(*i.else_e, bound, here);
      }
      void operator()(const Prim& p) const {
        for (const ExprPtr& a : p.args) w.expr(*a, bound, here);
      }
      void operator()(const PrimRef&) const {}
      void operator()(const ModRef& m) const {
        if (!w.prog.find_module(m.name))
          w.diags.push_back({"UnresolvedModule", m.name, here, e.loc});
      }
    };
    std::visit(V{*this, e, bound, here}, e.node);
  }

  void contract(const Contract& c) {
    if (const FlatContract* f = std::get_if<FlatContract>(&c.node)) {
      std::set<std::string> bound;
      size_t before = diags.size();
      expr(*f->pred, bound, -1);
      // A free variable in a predicate means the contract is not closed.
      for (size_t i = before; i < diags.size(); i++)
        if (diags[i].kind == "UnboundVariable") diags[i].kind = "OpenPredicate";
      return;
    }
    const FuncContract& fn = std::get<FuncContract>(c.node);
    contract(*fn.dom);
    contract(*fn.rng);
  }
};

}  // namespace

std::vector<Diagnostic> well_formed(const Program& p) {
  std::vector<Diagnostic> diags;
  WfCheck w{p, diags};
  for (const Module& m : p.modules) {
    w.contract(*m.contract);
    if (m.body) {
      std::set<std::string> bound;
      w.expr(**m.body, bound, -1);
    }
  }
  if (p.main) {
    std::set<std::string> bound;
    w.expr(*p.main, bound, -1);
  }
  return diags;
}

}  // namespace modan
