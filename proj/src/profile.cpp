#include "hmfg/profile.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hmfg {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}
}  // namespace

CosineProfile::CosineProfile(int dim, std::vector<CosineTerm> terms) : dim_(dim), terms_(std::move(terms)) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("unsupported dimension " + std::to_string(dim));
  for (const auto& t : terms_) {
    if (t.kx < 0 || t.ky < 0) throw std::invalid_argument("negative wavenumber");
    if (dim == 1 && t.ky != 0) throw std::invalid_argument("y-wavenumber in a 1D profile");
  }
}

CosineProfile CosineProfile::parse(const std::string& text, int dim) {
  const std::string s = strip_spaces(text);
  if (s.empty()) throw std::invalid_argument("empty profile");
  std::vector<CosineTerm> terms;
  size_t pos = 0;
  while (pos < s.size()) {
    double sign = 1;
    if (s[pos] == '+' || s[pos] == '-') {
      sign = s[pos] == '-' ? -1 : 1;
      ++pos;
    } else if (!terms.empty()) {
      throw std::invalid_argument("expected + or - in profile '" + text + "'");
    }
    size_t end = pos;
    while (end < s.size() && s[end] != '+' && s[end] != '-') {
      // allow exponents such as 1e-3
      if ((s[end] == 'e' || s[end] == 'E') && end + 1 < s.size() && (s[end + 1] == '-' || s[end + 1] == '+') &&
          end > pos && std::isdigit(static_cast<unsigned char>(s[end - 1])))
        end += 2;
      else
        ++end;
    }
    std::string tok = s.substr(pos, end - pos);
    pos = end;
    if (tok.empty()) throw std::invalid_argument("empty term in profile '" + text + "'");

    const size_t c = tok.find("cos");
    std::string num = c == std::string::npos ? tok : tok.substr(0, c);
    if (!num.empty() && num.back() == '*') num.pop_back();
    double coef = 1;
    if (!num.empty()) {
      size_t used = 0;
      try {
        coef = std::stod(num, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("bad coefficient '" + num + "' in profile '" + text + "'");
      }
      if (used != num.size()) throw std::invalid_argument("bad coefficient '" + num + "' in profile '" + text + "'");
    }
    CosineTerm term{sign * coef, 0, 0};
    if (c != std::string::npos) {
      std::string rest = tok.substr(c + 3);
      char axis = 'b';
      if (!rest.empty() && (rest[0] == 'x' || rest[0] == 'y')) {
        axis = rest[0];
        rest = rest.substr(1);
      }
      int k = 1;
      if (!rest.empty()) {
        for (char ch : rest)
          if (!std::isdigit(static_cast<unsigned char>(ch)))
            throw std::invalid_argument("bad wavenumber '" + rest + "' in profile '" + text + "'");
        k = std::stoi(rest);
      }
      if (dim == 1) {
        if (axis == 'y') throw std::invalid_argument("cosy in a 1D profile");
        term.kx = k;
      } else if (axis == 'x') {
        term.kx = k;
      } else if (axis == 'y') {
        term.ky = k;
      } else {
        term.kx = term.ky = k;
      }
    }
    terms.push_back(term);
  }
  return CosineProfile(dim, std::move(terms));
}

double CosineProfile::operator()(double x, double y) const {
  double v = 0;
  for (const auto& t : terms_) {
    double a = t.coef;
    if (t.kx) a *= std::cos(kTwoPi * t.kx * x);
    if (t.ky) a *= std::cos(kTwoPi * t.ky * y);
    v += a;
  }
  return v;
}

double CosineProfile::derivative_x(double x) const {
  double v = 0;
  for (const auto& t : terms_)
    if (t.kx) v -= t.coef * kTwoPi * t.kx * std::sin(kTwoPi * t.kx * x);
  return v;
}

double CosineProfile::primitive(double y) const {
  double v = 0;
  for (const auto& t : terms_)
    v += t.kx ? t.coef * std::sin(kTwoPi * t.kx * y) / (kTwoPi * t.kx) : t.coef * y;
  return v;
}

double CosineProfile::mean() const {
  double v = 0;
  for (const auto& t : terms_)
    if (t.kx == 0 && t.ky == 0) v += t.coef;
  return v;
}

bool CosineProfile::decreasing_on_half(int samples) const {
  if (dim_ != 1) return false;
  for (int i = 1; i < samples; ++i)
    if (!(derivative_x(0.5 * i / samples) < 0)) return false;
  return true;
}

Field CosineProfile::sample(const TorusGrid& g) const {
  if (g.dim() != dim_) throw std::invalid_argument("profile dimension does not match grid");
  return Field::from_function(g, [this](double x, double y) { return (*this)(x, y); });
}

std::string CosineProfile::str() const {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& t : terms_) {
    if (!first || t.coef < 0) os << (t.coef < 0 ? "-" : "+");
    os << std::abs(t.coef);
    if (t.kx && t.ky && t.kx == t.ky)
      os << "cos" << t.kx;
    else if (dim_ == 1 && t.kx)
      os << "cos" << t.kx;
    else if (t.kx && t.ky)
      throw std::logic_error("mixed wavenumbers have no text form");
    else if (t.kx)
      os << "cosx" << t.kx;
    else if (t.ky)
      os << "cosy" << t.ky;
    first = false;
  }
  return os.str();
}

}  // namespace hmfg
