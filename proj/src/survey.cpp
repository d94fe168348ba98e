#include "csi/survey.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace csi::survey {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double poly(const double* coeffs, int degree, double x) {
  double acc = coeffs[degree];
  for (int i = degree - 1; i >= 0; --i) acc = acc * x + coeffs[i];
  return acc;
}

}  // namespace

std::string_view to_string(Method method) { return method == Method::csi ? "csi" : "chat"; }

Method parse_method(std::string_view text) {
  const auto v = lower(trim(text));
  if (v == "csi") return Method::csi;
  if (v == "chat") return Method::chat;
  throw SurveyError("answer must be 'csi' or 'chat', got '" + std::string(text) + "'");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_upper_tail(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile requires p in (0,1)");
  // Wichura, Algorithm AS 241 (Applied Statistics 37, 1988), PPND16.
  static constexpr double a[] = {3.3871328727963666080e0,  1.3314166789178437745e+2,
                                 1.9715909503065514427e+3, 1.3731693765509461125e+4,
                                 4.5921953931549871457e+4, 6.7265770927008700853e+4,
                                 3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr double b[] = {1.0,
                                 4.2313330701600911252e+1, 6.8718700749205790830e+2,
                                 5.3941960214247511077e+3, 2.1213794301586595867e+4,
                                 3.9307895800092710610e+4, 2.8729085735721942674e+4,
                                 5.2264952788528545610e+3};
  static constexpr double c[] = {1.42343711074968357734e0,  4.63033784615654529590e0,
                                 5.76949722146069140550e0,  3.64784832476320460504e0,
                                 1.27045825245236838258e0,  2.41780725177450611770e-1,
                                 2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[] = {1.0,
                                 2.05319162663775882187e0,  1.67638483018380384940e0,
                                 6.89767334985100004550e-1, 1.48103976427480074590e-1,
                                 1.51986665636164571966e-2, 5.47593808499534494600e-4,
                                 1.05075007164441684324e-9};
  static constexpr double e[] = {6.65790464350110377720e0,  5.46378491116411436990e0,
                                 1.78482653991729133580e0,  2.96560571828504891230e-1,
                                 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                 2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[] = {1.0,
                                 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                                 1.48753612908506148525e-2, 7.86869131145613259100e-4,
                                 1.84631831751005468180e-5, 1.42151175831644588870e-7,
                                 2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * poly(a, 7, r) / poly(b, 7, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = poly(c, 7, r) / poly(d, 7, r);
  } else {
    r -= 5.0;
    value = poly(e, 7, r) / poly(f, 7, r);
  }
  return q < 0.0 ? -value : value;
}

double bonferroni_alpha(double family_alpha, std::size_t m) {
  if (m == 0) throw std::invalid_argument("bonferroni_alpha requires m >= 1");
  if (!(family_alpha > 0.0 && family_alpha < 1.0))
    throw std::invalid_argument("family alpha must be in (0,1)");
  return family_alpha / static_cast<double>(m);
}

ZTest proportion_z_test(std::size_t successes, std::size_t n, double p0, Sidedness sidedness) {
  if (n == 0) throw std::invalid_argument("proportion_z_test requires n >= 1");
  if (successes > n) throw std::invalid_argument("successes exceed n");
  if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("p0 must be in (0,1)");
  const double nn = static_cast<double>(n);
  const double p_hat = static_cast<double>(successes) / nn;
  const double z = (p_hat - p0) / std::sqrt(p0 * (1.0 - p0) / nn);
  double p_value = sidedness == Sidedness::two_sided ? 2.0 * normal_upper_tail(std::fabs(z))
                                                     : normal_upper_tail(z);
  return {z, std::min(1.0, p_value)};
}

Interval bonferroni_ci(std::size_t successes, std::size_t n, double family_alpha, std::size_t m,
                       IntervalMethod method) {
  if (n == 0) throw std::invalid_argument("bonferroni_ci requires n >= 1");
  if (successes > n) throw std::invalid_argument("successes exceed n");
  const double tail = bonferroni_alpha(family_alpha, m) / 2.0;
  const double z_star = -normal_quantile(tail);  // Φ⁻¹(1 − tail) without rounding 1 − tail
  const double nn = static_cast<double>(n);
  const double p_hat = static_cast<double>(successes) / nn;
  Interval out;
  if (method == IntervalMethod::wald) {
    const double half = z_star * std::sqrt(p_hat * (1.0 - p_hat) / nn);
    out = {p_hat - half, p_hat + half};
  } else {
    const double z2 = z_star * z_star;
    const double denom = 1.0 + z2 / nn;
    const double centre = (p_hat + z2 / (2.0 * nn)) / denom;
    const double half =
        z_star * std::sqrt(p_hat * (1.0 - p_hat) / nn + z2 / (4.0 * nn * nn)) / denom;
    out = {centre - half, centre + half};
  }
  out.low = std::clamp(out.low, 0.0, 1.0);
  out.high = std::clamp(out.high, 0.0, 1.0);
  return out;
}

std::vector<QuestionResult> analyze_surveys(std::span<const SurveyResponse> responses,
                                            const AnalysisOptions& options) {
  if (responses.empty()) throw SurveyError("no survey responses to analyze");
  const double alpha = bonferroni_alpha(options.family_alpha, options.tests);
  std::vector<QuestionResult> results;
  for (std::size_t q = 0; q < kQuestionCount; ++q) {
    QuestionResult r;
    r.question_id = std::string(kQuestionIds[q]);
    r.n = responses.size();
    r.csi_count = static_cast<std::size_t>(
        std::count_if(responses.begin(), responses.end(),
                      [q](const SurveyResponse& s) { return s.answers[q] == Method::csi; }));
    r.proportion = static_cast<double>(r.csi_count) / static_cast<double>(r.n);
    const auto test = proportion_z_test(r.csi_count, r.n, options.p0, options.sidedness);
    r.z = test.z;
    r.p_value = test.p_value;
    const auto ci =
        bonferroni_ci(r.csi_count, r.n, options.family_alpha, options.tests, options.interval);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
    r.significant = r.p_value < alpha;
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<SurveyResponse> parse_survey_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<SurveyResponse> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      if (cells.size() != kQuestionCount + 1 || lower(cells[0]) != "respondent")
        throw SurveyError("line " + std::to_string(line_no) +
                          ": expected header respondent,q1,q2,q3,q4,q5,q6,q7");
      for (std::size_t q = 0; q < kQuestionCount; ++q)
        if (lower(cells[q + 1]) != kQuestionIds[q])
          throw SurveyError("line " + std::to_string(line_no) + ": header column " +
                            std::to_string(q + 2) + " must be " + std::string(kQuestionIds[q]));
      have_header = true;
      continue;
    }
    if (cells.size() != kQuestionCount + 1)
      throw SurveyError("line " + std::to_string(line_no) + ": expected 8 cells, found " +
                        std::to_string(cells.size()));
    SurveyResponse r;
    r.respondent_id = cells[0];
    if (r.respondent_id.empty())
      throw SurveyError("line " + std::to_string(line_no) + ": missing respondent id");
    for (std::size_t q = 0; q < kQuestionCount; ++q) {
      if (cells[q + 1].empty())
        throw SurveyError("line " + std::to_string(line_no) + ": partial response, " +
                          std::string(kQuestionIds[q]) + " unanswered");
      try {
        r.answers[q] = parse_method(cells[q + 1]);
      } catch (const SurveyError& e) {
        throw SurveyError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    out.push_back(std::move(r));
  }
  if (!have_header) throw SurveyError("survey file is empty");
  return out;
}

std::string format_survey_csv(std::span<const SurveyResponse> responses) {
  std::string out = "respondent";
  for (auto id : kQuestionIds) {
    out += ',';
    out += id;
  }
  out += '\n';
  for (const auto& r : responses) {
    out += r.respondent_id;
    for (auto a : r.answers) {
      out += ',';
      out += to_string(a);
    }
    out += '\n';
  }
  return out;
}

std::string results_json(std::span<const QuestionResult> results, const AnalysisOptions& options) {
  nlohmann::json doc;
  doc["family_alpha"] = options.family_alpha;
  doc["tests"] = options.tests;
  doc["per_test_alpha"] = bonferroni_alpha(options.family_alpha, options.tests);
  doc["p0"] = options.p0;
  doc["sidedness"] = options.sidedness == Sidedness::two_sided ? "two_sided" : "greater";
  doc["interval"] = options.interval == IntervalMethod::wald ? "wald" : "wilson";
  doc["questions"] = nlohmann::json::array();
  for (const auto& r : results) {
    std::size_t q = 0;
    while (q < kQuestionCount && kQuestionIds[q] != r.question_id) ++q;
    doc["questions"].push_back({{"question_id", r.question_id},
                                {"question", q < kQuestionCount ? kQuestionText[q] : ""},
                                {"n", r.n},
                                {"csi_count", r.csi_count},
                                {"proportion", r.proportion},
                                {"z", r.z},
                                {"p_value", r.p_value},
                                {"ci_low", r.ci_low},
                                {"ci_high", r.ci_high},
                                {"significant", r.significant}});
  }
  return doc.dump(2) + "\n";
}

std::string results_table(std::span<const QuestionResult> results, const AnalysisOptions& options) {
  constexpr int kBarWidth = 40;
  const double alpha = bonferroni_alpha(options.family_alpha, options.tests);
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "CSI vs standard chat preference (n = %zu, %.0f%% Bonferroni-adjusted intervals, "
                "m = %zu, per-test alpha = %.6f, %s)\n\n",
                results.empty() ? std::size_t{0} : results.front().n,
                100.0 * (1.0 - options.family_alpha), options.tests, alpha,
                options.sidedness == Sidedness::two_sided ? "two-sided" : "one-sided");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-44s %6s %6s  %-17s %7s %10s  %s\n", "question", "CSI", "chat",
                "interval (CSI)", "z", "p", "sig");
  out += buf;
  for (const auto& r : results) {
    std::size_t q = 0;
    while (q < kQuestionCount && kQuestionIds[q] != r.question_id) ++q;
    std::string label = r.question_id + " " +
                        std::string(q < kQuestionCount ? kQuestionText[q] : std::string_view{});
    if (label.size() > 44) label.resize(44);
    std::snprintf(buf, sizeof buf, "%-44s %5.1f%% %5.1f%%  [%5.1f%%, %5.1f%%] %7.2f %10.3g  %s\n",
                  label.c_str(), 100.0 * r.proportion, 100.0 * (1.0 - r.proportion),
                  100.0 * r.ci_low, 100.0 * r.ci_high, r.z, r.p_value,
                  r.significant ? "yes" : "no");
    out += buf;
    // Segmented bar: '#' = CSI share, '-' = chat share, '|' marks 50%,
    // '[' and ']' mark the interval.
    std::string bar(kBarWidth, '-');
    const int csi_cells = static_cast<int>(std::lround(r.proportion * kBarWidth));
    for (int i = 0; i < csi_cells && i < kBarWidth; ++i) bar[static_cast<std::size_t>(i)] = '#';
    bar[kBarWidth / 2] = '|';
    const auto lo = std::clamp<long>(std::lround(r.ci_low * kBarWidth), 0, kBarWidth - 1);
    const auto hi = std::clamp<long>(std::lround(r.ci_high * kBarWidth), 0, kBarWidth - 1);
    bar[static_cast<std::size_t>(lo)] = '[';
    bar[static_cast<std::size_t>(hi)] = ']';
    out += "    " + bar + "\n";
  }
  return out;
}

}  // namespace csi::survey
