#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace csi::survey {

inline constexpr std::size_t kQuestionCount = 7;

inline constexpr std::array<std::string_view, kQuestionCount> kQuestionIds = {
    "q1", "q2", "q3", "q4", "q5", "q6", "q7"};

inline constexpr std::array<std::string_view, kQuestionCount> kQuestionText = {
    "Which method felt more productive?",
    "Which method made you feel more heard?",
    "Which method felt more collaborative?",
    "Which method surfaced better answers?",
    "Which method made you feel more buy-in?",
    "Which method made you feel more ownership?",
    "Which method did you prefer overall?"};

enum class Method { csi, chat };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct SurveyResponse {
  std::string respondent_id;
  std::array<Method, kQuestionCount> answers{};

  friend bool operator==(const SurveyResponse&, const SurveyResponse&) = default;
};

class SurveyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Normal distribution.

/// Φ(x), via erfc so both tails keep full relative precision.
double normal_cdf(double x);
/// 1 − Φ(x), computed directly rather than by subtraction.
double normal_upper_tail(double x);
/// Φ⁻¹(p) for p in (0,1), Wichura's AS241 (PPND16), ~1e-16 relative error.
double normal_quantile(double p);

// Tests and intervals.

/// family_alpha / m. Throws std::invalid_argument for m = 0 or alpha outside (0,1).
double bonferroni_alpha(double family_alpha, std::size_t m);

enum class Sidedness { two_sided, greater };

struct ZTest {
  double z = 0.0;
  double p_value = 1.0;
};

/// z = (successes/n − p0) / sqrt(p0(1 − p0)/n). Two-sided p = 2(1 − Φ(|z|));
/// `greater` tests H1: p > p0.
ZTest proportion_z_test(std::size_t successes, std::size_t n, double p0,
                        Sidedness sidedness = Sidedness::two_sided);

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

enum class IntervalMethod { wald, wilson };

/// Simultaneous interval for one of m proportions: critical value
/// z* = Φ⁻¹(1 − family_alpha/(2m)), clamped to [0,1]. Wald by default.
Interval bonferroni_ci(std::size_t successes, std::size_t n, double family_alpha, std::size_t m,
                       IntervalMethod method = IntervalMethod::wald);

struct QuestionResult {
  std::string question_id;
  std::size_t n = 0;
  std::size_t csi_count = 0;
  double proportion = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  bool significant = false;
};

struct AnalysisOptions {
  double family_alpha = 0.01;
  std::size_t tests = kQuestionCount;
  double p0 = 0.5;
  Sidedness sidedness = Sidedness::two_sided;
  IntervalMethod interval = IntervalMethod::wald;
};

/// One result per question. Throws SurveyError for zero responses.
std::vector<QuestionResult> analyze_surveys(std::span<const SurveyResponse> responses,
                                            const AnalysisOptions& options = {});

/// Header `respondent,q1,...,q7`; cells `csi` or `chat`. Partial rows are
/// rejected with the offending line number.
std::vector<SurveyResponse> parse_survey_csv(std::istream& in);
std::string format_survey_csv(std::span<const SurveyResponse> responses);

/// Machine-readable results document (JSON text).
std::string results_json(std::span<const QuestionResult> results, const AnalysisOptions& options);

/// Plain-text table: per question, the CSI/chat split as a segmented bar with
/// the proportion, interval and significance.
std::string results_table(std::span<const QuestionResult> results, const AnalysisOptions& options);

}  // namespace csi::survey
