#include "kbos/expr.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "kbos/error.hpp"

namespace kbos {

namespace {
constexpr int kMaxStack = 64;
}

struct Expr::Node {
  Kind kind = Kind::Constant;
  double value = 0.0;
  std::vector<std::shared_ptr<const Node>> args;
  bool has_theta = false;
  bool has_time = false;
};

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {
  compile();
}

Expr Expr::constant(double c) {
  if (!std::isfinite(c)) {
    throw InputError("expression constant must be finite");
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::Constant;
  n->value = c;
  return Expr(std::move(n));
}

Expr Expr::time() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Time;
  n->has_time = true;
  return Expr(std::move(n));
}

Expr Expr::theta() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Theta;
  n->has_theta = true;
  return Expr(std::move(n));
}

Expr Expr::exp(Expr arg) {
  if (arg.is_constant()) return constant(std::exp(arg.constant_value()));
  auto n = std::make_shared<Node>();
  n->kind = Kind::Exp;
  n->has_theta = arg.depends_on_theta();
  n->has_time = arg.depends_on_time();
  n->args.push_back(arg.node_);
  return Expr(std::move(n));
}

Expr Expr::sum(std::vector<Expr> terms) {
  double folded = 0.0;
  std::vector<std::shared_ptr<const Node>> kept;
  for (auto& e : terms) {
    if (e.is_constant()) {
      folded += e.constant_value();
    } else if (e.kind() == Kind::Sum) {
      for (const auto& a : e.node_->args) {
        if (a->kind == Kind::Constant) {
          folded += a->value;
        } else {
          kept.push_back(a);
        }
      }
    } else {
      kept.push_back(e.node_);
    }
  }
  if (folded != 0.0 || kept.empty()) {
    kept.push_back(constant(folded).node_);
  }
  if (kept.size() == 1) return Expr(kept.front());
  auto n = std::make_shared<Node>();
  n->kind = Kind::Sum;
  for (const auto& a : kept) {
    n->has_theta = n->has_theta || a->has_theta;
    n->has_time = n->has_time || a->has_time;
  }
  n->args = std::move(kept);
  return Expr(std::move(n));
}

Expr Expr::product(std::vector<Expr> factors) {
  double folded = 1.0;
  std::vector<std::shared_ptr<const Node>> kept;
  for (auto& e : factors) {
    if (e.is_constant()) {
      folded *= e.constant_value();
    } else if (e.kind() == Kind::Product) {
      for (const auto& a : e.node_->args) {
        if (a->kind == Kind::Constant) {
          folded *= a->value;
        } else {
          kept.push_back(a);
        }
      }
    } else {
      kept.push_back(e.node_);
    }
  }
  if (folded == 0.0) return constant(0.0);
  if (kept.empty()) return constant(folded);
  if (folded != 1.0) kept.insert(kept.begin(), constant(folded).node_);
  if (kept.size() == 1) return Expr(kept.front());
  auto n = std::make_shared<Node>();
  n->kind = Kind::Product;
  for (const auto& a : kept) {
    n->has_theta = n->has_theta || a->has_theta;
    n->has_time = n->has_time || a->has_time;
  }
  n->args = std::move(kept);
  return Expr(std::move(n));
}

Expr Expr::pow(Expr base, double exponent) {
  if (!std::isfinite(exponent)) {
    throw InputError("pow exponent must be finite");
  }
  if (exponent == 0.0) return constant(1.0);
  if (exponent == 1.0) return base;
  if (base.is_constant()) {
    return constant(std::pow(base.constant_value(), exponent));
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::Pow;
  n->value = exponent;
  n->has_theta = base.depends_on_theta();
  n->has_time = base.depends_on_time();
  n->args.push_back(base.node_);
  return Expr(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }

Expr::Kind Expr::kind() const { return node_->kind; }
bool Expr::is_constant() const { return node_->kind == Kind::Constant; }
double Expr::constant_value() const { return node_->value; }
bool Expr::depends_on_theta() const { return node_->has_theta; }
bool Expr::depends_on_time() const { return node_->has_time; }

void Expr::compile() {
  program_.clear();
  int depth = 0;
  int max_depth = 0;
  // Post-order walk with an explicit stack of (node, visited) pairs.
  std::vector<std::pair<const Node*, bool>> work{{node_.get(), false}};
  while (!work.empty()) {
    auto [n, visited] = work.back();
    work.pop_back();
    if (!visited && !n->args.empty()) {
      work.emplace_back(n, true);
      for (auto it = n->args.rbegin(); it != n->args.rend(); ++it) {
        work.emplace_back(it->get(), false);
      }
      continue;
    }
    const int arity = static_cast<int>(n->args.size());
    program_.push_back({n->kind, n->value, arity});
    depth += 1 - arity;
    max_depth = std::max(max_depth, depth + arity);
  }
  if (max_depth > kMaxStack) {
    throw InputError("expression too deeply nested (evaluation stack > 64)");
  }
}

double Expr::operator()(double theta, double t) const {
  std::array<double, kMaxStack> stack;
  int top = 0;
  for (const auto& ins : program_) {
    switch (ins.op) {
      case Kind::Constant:
        stack[top++] = ins.value;
        break;
      case Kind::Time:
        stack[top++] = t;
        break;
      case Kind::Theta:
        stack[top++] = theta;
        break;
      case Kind::Exp:
        stack[top - 1] = std::exp(stack[top - 1]);
        break;
      case Kind::Pow:
        stack[top - 1] = std::pow(stack[top - 1], ins.value);
        break;
      case Kind::Sum: {
        double acc = 0.0;
        for (int i = 0; i < ins.arity; ++i) acc += stack[top - ins.arity + i];
        top -= ins.arity;
        stack[top++] = acc;
        break;
      }
      case Kind::Product: {
        double acc = 1.0;
        for (int i = 0; i < ins.arity; ++i) acc *= stack[top - ins.arity + i];
        top -= ins.arity;
        stack[top++] = acc;
        break;
      }
    }
  }
  return stack[0];
}

Expr Expr::d_theta() const {
  if (!depends_on_theta()) return constant(0.0);
  switch (kind()) {
    case Kind::Theta:
      return constant(1.0);
    case Kind::Exp: {
      Expr u(node_->args[0]);
      return product({*this, u.d_theta()});
    }
    case Kind::Pow: {
      Expr u(node_->args[0]);
      const double p = node_->value;
      return product({constant(p), pow(u, p - 1.0), u.d_theta()});
    }
    case Kind::Sum: {
      std::vector<Expr> terms;
      for (const auto& a : node_->args) terms.push_back(Expr(a).d_theta());
      return sum(std::move(terms));
    }
    case Kind::Product: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < node_->args.size(); ++i) {
        std::vector<Expr> factors;
        for (std::size_t j = 0; j < node_->args.size(); ++j) {
          Expr a(node_->args[j]);
          factors.push_back(i == j ? a.d_theta() : a);
        }
        terms.push_back(product(std::move(factors)));
      }
      return sum(std::move(terms));
    }
    default:
      return constant(0.0);
  }
}

Expr Expr::d_t() const {
  if (!depends_on_time()) return constant(0.0);
  switch (kind()) {
    case Kind::Time:
      return constant(1.0);
    case Kind::Exp: {
      Expr u(node_->args[0]);
      return product({*this, u.d_t()});
    }
    case Kind::Pow: {
      Expr u(node_->args[0]);
      const double p = node_->value;
      return product({constant(p), pow(u, p - 1.0), u.d_t()});
    }
    case Kind::Sum: {
      std::vector<Expr> terms;
      for (const auto& a : node_->args) terms.push_back(Expr(a).d_t());
      return sum(std::move(terms));
    }
    case Kind::Product: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < node_->args.size(); ++i) {
        std::vector<Expr> factors;
        for (std::size_t j = 0; j < node_->args.size(); ++j) {
          Expr a(node_->args[j]);
          factors.push_back(i == j ? a.d_t() : a);
        }
        terms.push_back(product(std::move(factors)));
      }
      return sum(std::move(terms));
    }
    default:
      return constant(0.0);
  }
}

Expr Expr::from_json(const nlohmann::json& j) {
  if (j.is_number()) return constant(j.get<double>());
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "t") return time();
    if (s == "theta") return theta();
    throw InputError("unknown symbol '" + s + "' (expected \"t\" or \"theta\")");
  }
  if (!j.is_array() || j.empty() || !j[0].is_string()) {
    throw InputError("malformed expression: " + j.dump());
  }
  const auto op = j[0].get<std::string>();
  const std::size_t nargs = j.size() - 1;
  auto arg = [&](std::size_t i) { return from_json(j[i]); };
  if (op == "exp") {
    if (nargs != 1) throw InputError("exp takes one argument: " + j.dump());
    return exp(arg(1));
  }
  if (op == "pow") {
    if (nargs != 2 || !j[2].is_number()) {
      throw InputError("pow takes an expression and a numeric exponent: " +
                       j.dump());
    }
    return pow(arg(1), j[2].get<double>());
  }
  if (op == "+" || op == "*") {
    if (nargs < 1) throw InputError(op + " needs at least one argument");
    std::vector<Expr> items;
    for (std::size_t i = 1; i <= nargs; ++i) items.push_back(arg(i));
    return op == "+" ? sum(std::move(items)) : product(std::move(items));
  }
  if (op == "-") {
    if (nargs == 1) return product({constant(-1.0), arg(1)});
    if (nargs == 2) return sum({arg(1), product({constant(-1.0), arg(2)})});
    throw InputError("- takes one or two arguments: " + j.dump());
  }
  throw InputError("unknown operator '" + op + "'");
}

nlohmann::json Expr::to_json() const {
  switch (kind()) {
    case Kind::Constant:
      return node_->value;
    case Kind::Time:
      return "t";
    case Kind::Theta:
      return "theta";
    case Kind::Exp:
      return nlohmann::json::array({"exp", Expr(node_->args[0]).to_json()});
    case Kind::Pow:
      return nlohmann::json::array(
          {"pow", Expr(node_->args[0]).to_json(), node_->value});
    case Kind::Sum:
    case Kind::Product: {
      auto out = nlohmann::json::array({kind() == Kind::Sum ? "+" : "*"});
      for (const auto& a : node_->args) out.push_back(Expr(a).to_json());
      return out;
    }
  }
  return nullptr;
}

std::string Expr::to_string() const { return to_json().dump(); }

}  // namespace kbos
