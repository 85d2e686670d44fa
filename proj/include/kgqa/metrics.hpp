#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <set>
#include <vector>

namespace kgqa {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0/0 is taken as 0.
inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline double harmonic_f1(double p, double r) {
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

inline Prf prf_from_counts(std::size_t correct, std::size_t predicted,
                           std::size_t gold) {
  Prf m;
  m.precision = ratio(static_cast<double>(correct), static_cast<double>(predicted));
  m.recall = ratio(static_cast<double>(correct), static_cast<double>(gold));
  m.f1 = harmonic_f1(m.precision, m.recall);
  return m;
}

struct MicroMacro {
  Prf micro;
  Prf macro;
  std::size_t questions = 0;  // questions contributing to the macro average
};

// Pools item counts for micro scores and averages per-question scores for
// macro scores. A question with neither predicted nor gold items has nothing
// to judge and is left out of the macro average.
class PrfAccumulator {
 public:
  void add(std::size_t correct, std::size_t predicted, std::size_t gold) {
    correct_ += correct;
    predicted_ += predicted;
    gold_ += gold;
    if (predicted == 0 && gold == 0) return;
    Prf q = prf_from_counts(correct, predicted, gold);
    sum_.precision += q.precision;
    sum_.recall += q.recall;
    sum_.f1 += q.f1;
    ++questions_;
  }

  // Adds one question given its predicted and gold item sets.
  template <typename T>
  void add_sets(const std::set<T>& predicted, const std::set<T>& gold) {
    std::vector<T> common;
    std::set_intersection(predicted.begin(), predicted.end(), gold.begin(),
                          gold.end(), std::back_inserter(common));
    add(common.size(), predicted.size(), gold.size());
  }

  MicroMacro result() const {
    MicroMacro r;
    r.micro = prf_from_counts(correct_, predicted_, gold_);
    r.questions = questions_;
    if (questions_ > 0) {
      double n = static_cast<double>(questions_);
      r.macro = {sum_.precision / n, sum_.recall / n, sum_.f1 / n};
    }
    return r;
  }

 private:
  std::size_t correct_ = 0;
  std::size_t predicted_ = 0;
  std::size_t gold_ = 0;
  Prf sum_;
  std::size_t questions_ = 0;
};

}  // namespace kgqa
