#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kbos {

// Closed coefficient expression in time t and parameter theta.
//
// Grammar: constant | t | theta | exp(e) | e1 + ... + en | e1 * ... * en
// | pow(e, p) with a fixed real exponent p. Expressions are immutable and
// cheap to copy (shared tree). Partial derivatives are obtained by
// structural differentiation and are themselves expressions.
//
// JSON form is a prefix s-expression:
//   3.0, "t", "theta", ["exp", e], ["+", e1, e2, ...], ["*", e1, e2, ...],
//   ["pow", e, p]; ["-", e] and ["-", e1, e2] are accepted on input.
class Expr {
 public:
  enum class Kind { Constant, Time, Theta, Exp, Sum, Product, Pow };

  Expr();  // constant 0

  static Expr constant(double c);
  static Expr time();
  static Expr theta();
  static Expr exp(Expr arg);
  static Expr sum(std::vector<Expr> terms);
  static Expr product(std::vector<Expr> factors);
  static Expr pow(Expr base, double exponent);

  static Expr from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::string to_string() const;

  // Unchecked evaluation. Domain checks belong to ModelSpec::eval_coeff.
  double operator()(double theta, double t) const;

  Expr d_theta() const;
  Expr d_t() const;

  Kind kind() const;
  bool is_constant() const;
  // Only meaningful when is_constant().
  double constant_value() const;
  bool depends_on_theta() const;
  bool depends_on_time() const;

 private:
  struct Node;
  struct Instr {
    Kind op;
    double value;  // constant, or exponent for Pow
    int arity;     // Sum / Product
  };

  explicit Expr(std::shared_ptr<const Node> node);
  void compile();

  std::shared_ptr<const Node> node_;
  std::vector<Instr> program_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);

}  // namespace kbos
