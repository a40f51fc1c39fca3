/*
 Copyright 2026 DAPI Toolkit Contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "dapi/errors.hpp"
#include "dapi/linalg.hpp"

namespace dapi::graph {

/// Weighted directed communication graph over m nodes. Entry a_ij > 0 means
/// node i listens to node j; the diagonal is zero. Nodes are 0-based here,
/// 1-based in file formats and reports.
class WeightedDigraph {
public:
    explicit WeightedDigraph(Eigen::MatrixXd adjacency) : adj_(std::move(adjacency)) {
        if (adj_.rows() != adj_.cols()) throw ValidationError("adjacency must be square");
        if (adj_.rows() < 1) throw ValidationError("graph needs at least one node");
        for (Eigen::Index i = 0; i < adj_.rows(); ++i) {
            for (Eigen::Index j = 0; j < adj_.cols(); ++j) {
                const double a = adj_(i, j);
                if (!std::isfinite(a) || a < 0.0) {
                    throw ValidationError("adjacency entries must be finite and >= 0 (a[" +
                                          std::to_string(i + 1) + "][" + std::to_string(j + 1) + "])");
                }
                if (i == j && a != 0.0) {
                    throw ValidationError("adjacency diagonal must be exactly 0 (node " +
                                          std::to_string(i + 1) + ")");
                }
            }
        }
    }

    int node_count() const { return static_cast<int>(adj_.rows()); }
    const Eigen::MatrixXd& adjacency() const { return adj_; }
    bool has_edge(int i, int j) const { return adj_(i, j) > 0.0; }

private:
    Eigen::MatrixXd adj_;
};

/// Laplacian of a weighted digraph: l_ij = -a_ij off the diagonal and row sums
/// are zero by construction.
class LaplacianMatrix {
public:
    explicit LaplacianMatrix(Eigen::MatrixXd entries) : mat_(std::move(entries)) {
        if (mat_.rows() != mat_.cols()) throw ValidationError("Laplacian must be square");
        const double scale = std::max(1.0, mat_.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < mat_.rows(); ++i) {
            if (mat_(i, i) < 0.0) throw ValidationError("Laplacian diagonal must be >= 0");
            double off = 0.0;
            for (Eigen::Index j = 0; j < mat_.cols(); ++j) {
                if (i == j) continue;
                if (mat_(i, j) > 0.0) throw ValidationError("Laplacian off-diagonal must be <= 0");
                off += mat_(i, j);
            }
            if (std::abs(off + mat_(i, i)) > 1e-12 * scale) {
                throw ValidationError("Laplacian row " + std::to_string(i + 1) + " does not sum to zero");
            }
        }
    }

    int size() const { return static_cast<int>(mat_.rows()); }
    const Eigen::MatrixXd& entries() const { return mat_; }

private:
    Eigen::MatrixXd mat_;
};

/// Orthonormal basis V of the subspace orthogonal to the ones vector,
/// m x (m-1). Together with 1 it forms the nonsingular transform used by the
/// cascade coordinates.
class ComplementBasis {
public:
    explicit ComplementBasis(Eigen::MatrixXd columns) : cols_(std::move(columns)) {
        if (cols_.rows() < 2 || cols_.cols() != cols_.rows() - 1) {
            throw ValidationError("complement basis must be m x (m-1) with m >= 2");
        }
        const Eigen::Index k = cols_.cols();
        const Eigen::MatrixXd gram = cols_.transpose() * cols_ - Eigen::MatrixXd::Identity(k, k);
        if (gram.cwiseAbs().maxCoeff() > 1e-12) {
            throw ValidationError("complement basis columns are not orthonormal");
        }
        const Eigen::RowVectorXd ones_proj = Eigen::RowVectorXd::Ones(cols_.rows()) * cols_;
        if (ones_proj.cwiseAbs().maxCoeff() > 1e-12) {
            throw ValidationError("complement basis columns are not orthogonal to the ones vector");
        }
    }

    int ambient_dim() const { return static_cast<int>(cols_.rows()); }
    const Eigen::MatrixXd& columns() const { return cols_; }

private:
    Eigen::MatrixXd cols_;
};

/// l_ij = -a_ij for i != j, l_ii = sum of row i's weights. Row sums cancel
/// exactly because the diagonal accumulates the identical terms in the
/// identical order.
inline LaplacianMatrix build_laplacian(const WeightedDigraph& g) {
    const int m = g.node_count();
    const Eigen::MatrixXd& a = g.adjacency();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        double degree = 0.0;
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            l(i, j) = -a(i, j);
            degree += a(i, j);
        }
        l(i, i) = degree;
    }
    return LaplacianMatrix(std::move(l));
}

/// True iff every other node has a directed path terminating at node i.
/// Search runs over reversed edges starting from i.
inline bool is_globally_reachable(const WeightedDigraph& g, int i) {
    const int m = g.node_count();
    if (i < 0 || i >= m) throw DimensionMismatch("node index out of range");
    std::vector<char> seen(m, 0);
    std::vector<int> stack{i};
    seen[i] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int u = 0; u < m; ++u) {
            if (!seen[u] && g.adjacency()(u, v) > 0.0) {
                seen[u] = 1;
                ++count;
                stack.push_back(u);
            }
        }
    }
    return count == m;
}

/// All globally reachable nodes, ascending; empty when there are none.
inline std::vector<int> find_globally_reachable(const WeightedDigraph& g) {
    std::vector<int> out;
    for (int i = 0; i < g.node_count(); ++i) {
        if (is_globally_reachable(g, i)) out.push_back(i);
    }
    return out;
}

/// Left null vector of the Laplacian: w'L = 0, w >= 0, sum(w) = 1. Computed by
/// Gaussian elimination with partial pivoting on L'; rank is decided at 1e-9
/// relative to the pivot scale. Entries are positive exactly on the globally
/// reachable nodes.
inline Eigen::VectorXd left_null_vector(const LaplacianMatrix& L) {
    const int m = L.size();
    Eigen::MatrixXd u = L.entries().transpose();
    const double maxabs = u.cwiseAbs().maxCoeff();
    const double tol = linalg::kRankTol * maxabs;

    std::vector<int> pivot_row_of_col(m, -1);
    int row = 0;
    for (int col = 0; col < m && row < m; ++col) {
        int best = row;
        for (int r = row + 1; r < m; ++r) {
            if (std::abs(u(r, col)) > std::abs(u(best, col))) best = r;
        }
        if (maxabs == 0.0 || std::abs(u(best, col)) <= tol) continue; // free column
        u.row(row).swap(u.row(best));
        for (int r = row + 1; r < m; ++r) {
            const double factor = u(r, col) / u(row, col);
            u(r, col) = 0.0;
            for (int c = col + 1; c < m; ++c) u(r, c) -= factor * u(row, c);
        }
        pivot_row_of_col[col] = row;
        ++row;
    }

    std::vector<int> free_cols;
    for (int col = 0; col < m; ++col) {
        if (pivot_row_of_col[col] < 0) free_cols.push_back(col);
    }
    if (free_cols.size() != 1) {
        throw NullspaceNotOneDimensional("Laplacian nullspace has dimension " +
                                         std::to_string(free_cols.size()) +
                                         "; the graph lacks a unique consensus direction");
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    w(free_cols[0]) = 1.0;
    for (int col = m - 1; col >= 0; --col) {
        const int pr = pivot_row_of_col[col];
        if (pr < 0) continue;
        double s = 0.0;
        for (int c = col + 1; c < m; ++c) s += u(pr, c) * w(c);
        w(col) = -s / u(pr, col);
    }

    if (w.sum() < 0.0) w = -w;
    const double wmax = w.cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i) {
        if (std::abs(w(i)) <= 1e-12 * wmax) w(i) = 0.0;
    }
    if (w.minCoeff() < 0.0) {
        throw NullspaceNotOneDimensional("left null vector has mixed signs; matrix is not a digraph Laplacian");
    }
    w /= w.sum();
    return w;
}

/// Deterministic orthonormal complement of the ones vector: the trailing m-1
/// columns of the Householder reflector that maps e_1 to 1/sqrt(m).
inline ComplementBasis build_complement_basis(int m) {
    if (m < 2) throw DimensionMismatch("complement basis requires m >= 2");
    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
    Eigen::VectorXd v = Eigen::VectorXd::Constant(m, -inv_sqrt_m);
    v(0) += 1.0; // v = e_1 - 1/sqrt(m)
    const double vtv = v.squaredNorm();
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m) - (2.0 / vtv) * (v * v.transpose());
    return ComplementBasis(h.rightCols(m - 1));
}

/// V' L V, the disagreement block of the transformed Laplacian.
inline Eigen::MatrixXd projected_laplacian(const LaplacianMatrix& L, const ComplementBasis& basis) {
    if (basis.ambient_dim() != L.size()) {
        throw DimensionMismatch("projected_laplacian: basis ambient dimension must match Laplacian size");
    }
    return basis.columns().transpose() * L.entries() * basis.columns();
}

/// True iff all eigenvalues of A have negative real part, decided by unique
/// solvability of A'P + PA = -I together with a Cholesky of P.
inline bool is_hurwitz(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) throw DimensionMismatch("is_hurwitz: matrix must be square");
    if (A.rows() > 64) throw DimensionMismatch("is_hurwitz: dimension > 64 unsupported");
    const linalg::LyapunovSolve sol = linalg::lyapunov_identity_solve(A);
    return sol.solvable && sol.positive_definite;
}

} // namespace dapi::graph
