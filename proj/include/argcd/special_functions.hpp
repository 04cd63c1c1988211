// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace argcd {

/// Regularized lower incomplete gamma P(a, x); a > 0, x >= 0.
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b); a, b > 0, 0 <= x <= 1.
double incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `dof` > 0 degrees of freedom.
double student_t_two_sided_p(double t, double dof);

}  // namespace argcd
