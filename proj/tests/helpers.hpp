#pragma once

#include "varpro/features.hpp"
#include "varpro/rng.hpp"
#include "varpro/teacher.hpp"
#include "varpro/trainer.hpp"

#include <cmath>
#include <numbers>

namespace test {

using namespace varpro;

inline constexpr double kPi = std::numbers::pi;

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

/// Dense Gaussian matrix with entries of unit scale.
inline FeatureMatrix random_matrix(Rng& rng, int n, int m) {
  FeatureMatrix phi(n, m);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) phi(j, i) = rng.normal();
  return phi;
}

inline Eigen::VectorXd random_vector(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int j = 0; j < n; ++j) v[j] = rng.normal();
  return v;
}

inline ParticleEnsemble circle_atoms(std::initializer_list<double> thetas) {
  ParticleEnsemble e;
  e.domain = Domain::circle();
  for (double t : thetas) e.atoms.push_back(canonicalize({t}, e.domain));
  return e;
}

/// Small ReLU teacher-student problem.
struct SmallProblem {
  FeatureModel model = FeatureModel::relu_sphere();
  ParticleEnsemble teacher;
  DataSet data;
  ParticleEnsemble student;
};

inline SmallProblem small_problem(std::uint64_t seed, int M, int N, int teacher_width = 64) {
  SmallProblem p;
  Rng rng = Rng::substream(seed, {1});
  p.teacher = sample_teacher(TeacherSpec::circle_default(100.0, teacher_width), rng);
  p.data = make_dataset(p.model, p.teacher, N, rng);
  p.student = init_uniform(M, Domain::circle(), rng);
  return p;
}

}  // namespace test
