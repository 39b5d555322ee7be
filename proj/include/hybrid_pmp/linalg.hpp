#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "errors.hpp"

namespace hybrid_pmp
{
    using Vector = Eigen::VectorXd;
    using Matrix = Eigen::MatrixXd;

    /// Singular values below this fraction of the largest are treated as zero.
    inline constexpr double rank_cutoff = 1e-9;

    inline int numerical_rank(const Eigen::VectorXd& singular_values)
    {
        if (singular_values.size() == 0 || singular_values(0) <= 0.0)
        {
            return 0;
        }
        const double threshold = rank_cutoff * singular_values(0);
        int rank               = 0;
        for (Eigen::Index i = 0; i < singular_values.size(); ++i)
        {
            if (singular_values(i) > threshold)
            {
                ++rank;
            }
        }
        return rank;
    }

    inline int numerical_rank(const Matrix& m)
    {
        if (m.size() == 0)
        {
            return 0;
        }
        Eigen::JacobiSVD<Matrix> svd(m);
        return numerical_rank(svd.singularValues());
    }

    // Flip v so that its largest-magnitude entry is positive. SVD and QR only fix
    // basis vectors up to sign; this pins them down.
    inline void canonical_sign(Eigen::Ref<Vector> v)
    {
        Eigen::Index idx = 0;
        v.cwiseAbs().maxCoeff(&idx);
        if (v(idx) < 0.0)
        {
            v = -v;
        }
    }

    /**
     * Moore-Penrose pseudo-inverse of m through a full SVD.
     *
     * The declared rank is checked against the numerical rank (relative cutoff
     * rank_cutoff); a mismatch throws RankMismatch.
     */
    inline Matrix right_pseudo_inverse(const Matrix& m, int rank)
    {
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto& sigma = svd.singularValues();
        const int found   = numerical_rank(sigma);
        if (found != rank)
        {
            throw RankMismatch(rank, found);
        }
        Matrix pinv = Matrix::Zero(m.cols(), m.rows());
        for (int i = 0; i < rank; ++i)
        {
            pinv += svd.matrixV().col(i) * (1.0 / sigma(i)) * svd.matrixU().col(i).transpose();
        }
        return pinv;
    }

    /// Orthonormal basis (as columns) of the complement of a nonzero vector.
    inline Matrix orthonormal_complement(const Vector& v)
    {
        const Eigen::Index n = v.size();
        Eigen::HouseholderQR<Matrix> qr(v.normalized());
        Matrix q = qr.householderQ() * Matrix::Identity(n, n);
        Matrix basis = q.rightCols(n - 1);
        for (Eigen::Index j = 0; j < basis.cols(); ++j)
        {
            canonical_sign(basis.col(j));
        }
        return basis;
    }

    inline bool all_finite(const Vector& v)
    {
        return v.allFinite();
    }
} // namespace hybrid_pmp
