#pragma once

// Labeled abstract syntax for the contract-module language, plus the
// parser, printer and well-formedness checks.
//
// Surface grammar (one program per .mod file):
//
//   program  :=  form+
//   form     :=  (module NAME contract body) | (main expr)
//   contract :=  (-> contract contract) | expr          ; expr = flat predicate
//   body     :=  opaque | expr
//   expr     :=  INT | STRING | #t | #f | NAME
//             |  (lambda (x) expr) | (if expr expr expr)
//             |  (PRIM expr ...) | (expr expr) | (expr)
//
// Applications are unary (multi-argument calls are written curried).  A
// one-element form `(e)` is the nullary-call notation and denotes `e`
// itself: module values already stand for whatever their body produces,
// so "calling" a module with no arguments is the same as referencing it.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace modan {

struct SourceLoc {
  int line = 0;
  int col = 0;
};

// Object-language constants.
using Constant = std::variant<int64_t, std::string, bool>;

bool constant_truthy(const Constant& c);
std::string render_constant(const Constant& c);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Contract;
using ContractPtr = std::shared_ptr<const Contract>;

// Blame party: a module name, or "main" for the top-level expression.
using Party = std::string;
inline const char* kMainParty = "main";

struct Var {
  std::string name;
};
struct Lit {
  Constant value;
};
struct Lam {
  std::string param;
  ExprPtr body;
};
struct App {
  ExprPtr fn;
  ExprPtr arg;
};
struct If {
  ExprPtr test;
  ExprPtr then_e;
  ExprPtr else_e;
};
struct Prim {
  std::string op;
  std::vector<ExprPtr> args;
};
// A primitive name in value position, e.g. the `string?` in a contract.
struct PrimRef {
  std::string op;
};
struct ModRef {
  std::string name;
};

struct Expr {
  std::variant<Var, Lit, Lam, App, If, Prim, PrimRef, ModRef> node;
  int id = -1;    // unique node id within the Program
  int site = -1;  // site id; assigned to App and Prim nodes only
  SourceLoc loc;
  Party owner = kMainParty;  // module whose source contains this node
};

// Contracts: flat predicates or function contracts checked at call/return.
struct FlatContract {
  ExprPtr pred;      // closed except for module and primitive names
  std::string text;  // normalized source text of the predicate
};
struct FuncContract {
  ContractPtr dom;
  ContractPtr rng;
};

struct Contract {
  std::variant<FlatContract, FuncContract> node;
  SourceLoc loc;
};

struct Module {
  std::string name;
  ContractPtr contract;
  std::optional<ExprPtr> body;  // nullopt = opaque
  SourceLoc loc;
  int boundary_site = -1;  // synthetic site for checks at this module's boundary
};

struct Program {
  std::vector<Module> modules;
  ExprPtr main;
  int next_node_id = 0;
  int next_site_id = 0;
  std::map<int, SourceLoc> site_locs;

  const Module* find_module(const std::string& name) const;
  bool has_opaque_module() const;
};

// Site id classes.  Non-negative sites come from App/Prim nodes of the
// source program; -1..-999 are module-boundary checks; anything at or
// below kExternalSiteBase belongs to synthesized code (generated module
// bodies, exploration of values sent into opaque modules).
constexpr int kExternalSiteBase = -1000;
constexpr int kHavocSite = -1000;
inline bool external_site(int s) { return s <= kExternalSiteBase; }

struct SyntaxError : std::runtime_error {
  SyntaxError(int line_, int col_, const std::string& msg)
      : std::runtime_error("syntax error at " + std::to_string(line_) + ":" +
                           std::to_string(col_) + ": " + msg),
        line(line_),
        col(col_) {}
  int line;
  int col;
};

struct DuplicateModule : std::runtime_error {
  explicit DuplicateModule(const std::string& name_)
      : std::runtime_error("duplicate module: " + name_), name(name_) {}
  std::string name;
};

// Primitive operations. Unary primitives may appear in value position.
bool is_primitive(const std::string& name);
int primitive_arity(const std::string& name);  // -1 if not a primitive

Program parse(const std::string& text);

std::string unparse(const Program& p);
std::string unparse_expr(const Expr& e);
std::string contract_text(const Contract& c);

// Structural comparisons ignoring node ids, site ids and locations.
// Module references compare by name.
int expr_cmp(const Expr& a, const Expr& b);
int contract_cmp(const Contract& a, const Contract& b);
inline bool expr_equal(const Expr& a, const Expr& b) { return expr_cmp(a, b) == 0; }
inline bool contract_equal(const Contract& a, const Contract& b) {
  return contract_cmp(a, b) == 0;
}
bool program_equal(const Program& a, const Program& b);  // modulo ids/sites/locs

struct Diagnostic {
  std::string kind;    // "UnboundVariable", "UnresolvedModule", "OpenPredicate"
  std::string detail;  // offending name
  int site = -1;       // nearest enclosing site, -1 at top level
  SourceLoc loc;
  std::string to_string() const;
};

// Empty result means the program is well formed.
std::vector<Diagnostic> well_formed(const Program& p);

}  // namespace modan
