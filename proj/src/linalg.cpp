#include "pebo/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace pebo {

bool is_diagonal(const Eigen::MatrixXd& A, double tol) {
    if (A.rows() != A.cols()) return false;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j)
            if (i != j && std::abs(A(i, j)) > tol) return false;
    return true;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
    if (is_diagonal(A)) {
        Eigen::MatrixXd E = Eigen::MatrixXd::Zero(A.rows(), A.cols());
        for (int i = 0; i < A.rows(); ++i) E(i, i) = std::exp(A(i, i));
        return E;
    }
    // scaling and squaring with the (6,6) Pade approximant
    const int n = static_cast<int>(A.rows());
    const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
    const Eigen::MatrixXd As = A / std::pow(2.0, squarings);

    // degree-13 Pade coefficients, even/odd split
    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd A2 = As * As;
    const Eigen::MatrixXd A4 = A2 * A2;
    const Eigen::MatrixXd A6 = A2 * A4;
    const Eigen::MatrixXd U =
        As * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 +
              b[3] * A2 + b[1] * I);
    const Eigen::MatrixXd V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 +
                              b[4] * A4 + b[2] * A2 + b[0] * I;
    Eigen::MatrixXd R = (V - U).partialPivLu().solve(V + U);
    for (int i = 0; i < squarings; ++i) R = R * R;
    return R;
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& M, double rel_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return Eigen::MatrixXd::Zero(M.cols(), M.rows());
    Eigen::VectorXd si = Eigen::VectorXd::Zero(s.size());
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0)) si(i) = 1.0 / s(i);
    return svd.matrixV() * si.asDiagonal() * svd.matrixU().transpose();
}

int svd_rank(const Eigen::MatrixXd& M, double rel_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const Eigen::VectorXd& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0)) ++r;
    return r;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    return svd.singularValues();
}

}  // namespace pebo
