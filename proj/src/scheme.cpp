#include "mflow/scheme.hpp"

#include <stdexcept>

#include <json.hpp>

namespace mflow {

SchemeCoefficients::SchemeCoefficients(int steps, int stages) : steps_(steps), stages_(stages) {
  if (steps < 1 || stages < 1)
    throw std::invalid_argument("scheme needs at least one step and one stage");
}

void SchemeCoefficients::set(int i, int j, Rational value) {
  if (i < 1 || i > stages_ || j < -steps_ + 1 || j > i - 1)
    throw std::out_of_range("gamma(" + std::to_string(i) + "," + std::to_string(j) +
                            ") outside the scheme's index range");
  if (value == 0)
    gamma_.erase({i, j});
  else
    gamma_[{i, j}] = std::move(value);
}

Rational SchemeCoefficients::gamma(int i, int j) const {
  auto it = gamma_.find({i, j});
  return it == gamma_.end() ? Rational(0) : it->second;
}

Rational SchemeCoefficients::row_sum(int i) const {
  Rational s = 0;
  for (auto it = gamma_.lower_bound({i, -steps_ + 1}); it != gamma_.end() && it->first.first == i; ++it)
    s += it->second;
  return s;
}

std::vector<std::pair<int, Rational>> SchemeCoefficients::row(int i) const {
  std::vector<std::pair<int, Rational>> out;
  for (auto it = gamma_.lower_bound({i, -steps_ + 1}); it != gamma_.end() && it->first.first == i; ++it)
    out.emplace_back(it->first.second, it->second);
  return out;
}

WeightMatrix::WeightMatrix(int steps, int stages)
    : steps_(steps),
      stages_(stages),
      data_(static_cast<std::size_t>((stages + 1) * (steps + stages)), Rational(0)) {}

std::size_t WeightMatrix::offset(int i, int j) const {
  if (i < 0 || i > stages_ || j < -steps_ + 1 || j > stages_)
    throw std::out_of_range("w(" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
  return static_cast<std::size_t>(i * (steps_ + stages_) + (j + steps_ - 1));
}

const Rational& WeightMatrix::at(int i, int j) const { return data_[offset(i, j)]; }

void WeightMatrix::set(int i, int j, Rational value) {
  if (i <= j) throw std::invalid_argument("w(i,j) is identically zero for i <= j");
  data_[offset(i, j)] = std::move(value);
}

WeightMatrix weights(const SchemeCoefficients& scheme) {
  const int m = scheme.steps();
  const int n = scheme.stages();
  WeightMatrix w(m, n);
  // gamma(0, .) and gamma(N+1, .) vanish; gamma() already returns zero there
  // because those rows are never stored.
  for (int i = 0; i <= n; ++i)
    for (int j = -m + 1; j < i; ++j) {
      Rational next = i + 1 <= n ? scheme.gamma(i + 1, j) : Rational(0);
      Rational here = i >= 1 ? scheme.gamma(i, j) : Rational(0);
      w.set(i, j, next - here);
    }
  return w;
}

WeightMatrix shifted_weights(const SchemeCoefficients& scheme, const Rational& l1,
                             const Rational& l2) {
  if (l1 < 0 || !(l1 < l2)) throw std::invalid_argument("shifted weights need 0 <= L1 < L2");
  if (scheme.steps() < 2) throw std::invalid_argument("shifted weights need at least two steps");
  WeightMatrix w = weights(scheme);
  w.set(0, -1, w.at(0, -1) - l1);
  w.set(scheme.stages(), 0, w.at(scheme.stages(), 0) + l2);
  return w;
}

ConsistencyReport consistency_vars(const SchemeCoefficients& scheme) {
  const int m = scheme.steps();
  const int n = scheme.stages();
  ConsistencyReport r;
  r.steps = m;
  r.stages = n;
  const auto size = static_cast<std::size_t>(m + n);
  r.a.assign(size, 0);
  r.b.assign(size, 0);
  r.c.assign(size, 0);
  r.d.assign(size, 0);
  auto slot = [m](int j) { return static_cast<std::size_t>(j + m - 1); };

  // Previous steps sit at t_n + j k on the exact trajectory.
  for (int j = -m + 1; j <= 0; ++j) {
    Rational t = j;
    r.a[slot(j)] = t;
    r.b[slot(j)] = t * t / 2;
    r.c[slot(j)] = t * t * t / 6;
    r.d[slot(j)] = t * t * t / 6;
  }

  for (int i = 1; i <= n; ++i) {
    const auto row = scheme.row(i);
    Rational s = 0;
    for (const auto& [j, g] : row) s += g;
    if (s == 0)
      throw std::domain_error("scheme ill-posed for consistency analysis: stage " +
                              std::to_string(i) + " has zero row sum");
    Rational sa = 1, sb = 0, sc = 0, sd = 0;
    for (const auto& [j, g] : row) {
      sa += g * r.a[slot(j)];
      sb += g * r.b[slot(j)];
      sc += g * r.c[slot(j)];
      sd += g * r.d[slot(j)];
    }
    r.a[slot(i)] = sa / s;
    r.b[slot(i)] = (r.a[slot(i)] + sb) / s;
    r.c[slot(i)] = (r.b[slot(i)] + sc) / s;
    r.d[slot(i)] = (r.a[slot(i)] * r.a[slot(i)] / 2 + sd) / s;
  }
  r.order = classify_order(r);
  return r;
}

int classify_order(const ConsistencyReport& report) {
  const int n = report.stages;
  if (report.a_at(n) != 1) return 0;
  if (report.b_at(n) != Rational(1, 2)) return 1;
  if (report.c_at(n) != Rational(1, 6) || report.d_at(n) != Rational(1, 6)) return 2;
  return 3;
}

namespace {

SchemeCoefficients make_backward_euler() {
  SchemeCoefficients s(1, 1);
  s.set(1, 0, 1);
  return s;
}

SchemeCoefficients make_stage3_order2() {
  SchemeCoefficients s(1, 3);
  s.set(1, 0, 4);
  s.set(2, 0, -1);
  s.set(2, 1, 5);
  s.set(3, 0, -2);
  s.set(3, 1, Rational(-8, 5));
  s.set(3, 2, Rational(48, 5));
  return s;
}

SchemeCoefficients make_diag7_order3() {
  // Columns: gamma(i,-1), gamma(i,0), gamma(i,i-1).
  static const char* const table[7][3] = {
      {"1/5", "324/25", nullptr},
      {"-67/100", "16/25", "249/20"},
      {"-1/100", "-19/25", "1327/100"},
      {"13/50", "-71/50", "897/100"},
      {"1/20", "-31/50", "69/10"},
      {"6738642394659375271309286924642199204/499724271717869165338634999114429476375",
       "-1490348725590513376673846530372322969031/999448543435738330677269998228858952750",
       "33204424381521663791982510017718750000/3997794173742953322709079992915435811"},
      {"12657604782253956245795836543983271244969029/68341222729403241230150248553811869282112250",
       "-20148945983758481800702871507047428317759489/34170611364701620615075124276905934641056125",
       "384415962327102116281943490933129440840735787/34170611364701620615075124276905934641056125"},
  };
  SchemeCoefficients s(2, 7);
  for (int i = 1; i <= 7; ++i) {
    const auto& row = table[i - 1];
    s.set(i, -1, parse_rational(row[0]));
    s.set(i, 0, parse_rational(row[1]));
    if (row[2] != nullptr) s.set(i, i - 1, parse_rational(row[2]));
  }
  return s;
}

}  // namespace

SchemeCoefficients builtin_scheme(std::string_view name) {
  if (name == "backward_euler") return make_backward_euler();
  if (name == "stage3_order2") return make_stage3_order2();
  if (name == "diag7_order3") return make_diag7_order3();
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

std::vector<std::string> builtin_scheme_names() {
  return {"backward_euler", "stage3_order2", "diag7_order3"};
}

std::string scheme_to_json(const SchemeCoefficients& scheme) {
  nlohmann::ordered_json doc;
  doc["M"] = scheme.steps();
  doc["N"] = scheme.stages();
  doc["gamma"] = nlohmann::ordered_json::array();
  for (const auto& [ij, g] : scheme.entries()) {
    nlohmann::ordered_json rec;
    rec["i"] = ij.first;
    rec["j"] = ij.second;
    rec["num"] = numerator(g).str();
    rec["den"] = denominator(g).str();
    doc["gamma"].push_back(rec);
  }
  return doc.dump(2) + "\n";
}

SchemeCoefficients scheme_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("scheme file is not valid JSON: ") + e.what());
  }
  if (!doc.contains("M") || !doc.contains("N") || !doc.contains("gamma"))
    throw std::invalid_argument("scheme file needs fields M, N and gamma");
  SchemeCoefficients s(doc.at("M").get<int>(), doc.at("N").get<int>());
  auto as_text = [](const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  for (const auto& rec : doc.at("gamma")) {
    const int i = rec.at("i").get<int>();
    const int j = rec.at("j").get<int>();
    Rational value;
    if (rec.contains("value")) {
      value = parse_rational(as_text(rec.at("value")));
    } else {
      Rational num = parse_rational(as_text(rec.at("num")));
      Rational den = parse_rational(as_text(rec.at("den")));
      if (den == 0) throw std::invalid_argument("zero denominator in scheme file");
      value = num / den;
    }
    s.set(i, j, value);
  }
  return s;
}

}  // namespace mflow
