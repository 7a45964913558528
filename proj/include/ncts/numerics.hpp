#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ncts {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Builds a matrix from nested rows; throws DimensionError on ragged input.
Mat mat_from_rows(const std::vector<std::vector<double>>& rows);

bool all_finite(const Mat& m);

// Smallest eigenvalue of a symmetric matrix. The input is symmetrized as
// (M + M^T)/2 after checking relative asymmetry <= 1e-12.
double min_eig_sym(const Mat& m);
double max_eig_sym(const Mat& m);
Vec eigenvalues_sym(const Mat& m);

// Orthogonal split of a (possibly singular) descriptor matrix:
// U^T E V = diag(Sigma_r, 0) with Sigma_r invertible.
struct DaeDecomposition {
    Mat U;
    Mat V;
    Vec sigma; // leading r singular values
    std::size_t rank = 0;

    std::size_t n() const { return static_cast<std::size_t>(U.rows()); }
    Mat U_diff() const { return U.leftCols(static_cast<Eigen::Index>(rank)); }
    Mat U_alg() const { return U.rightCols(static_cast<Eigen::Index>(n() - rank)); }
    Mat V_diff() const { return V.leftCols(static_cast<Eigen::Index>(rank)); }
    Mat V_alg() const { return V.rightCols(static_cast<Eigen::Index>(n() - rank)); }
};

inline constexpr double kRankTolerance = 1e-10;

DaeDecomposition dae_coordinates(const Mat& e);
std::size_t numeric_rank(const Mat& m, double rel_tol = kRankTolerance);

// Block partition of a square matrix. Block indices are 1-based to match
// the way the block tables are written.
class BlockLayout {
public:
    BlockLayout() = default;
    explicit BlockLayout(std::vector<std::size_t> sizes, std::vector<std::string> names = {});

    std::size_t count() const { return sizes_.size(); }
    std::size_t size(std::size_t block) const;
    std::size_t offset(std::size_t block) const;
    std::size_t total() const { return total_; }
    const std::vector<std::size_t>& sizes() const { return sizes_; }

    std::size_t index_of(const std::string& name) const;
    const std::string& name(std::size_t block) const;

    std::size_t append(std::size_t size, std::string name = {});

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<std::string> names_;
    std::map<std::string, std::size_t> by_name_;
    std::size_t total_ = 0;
};

// Write/read a block of a matrix partitioned by `layout`. set_sym_block also
// writes the transpose into (j, i) so the result stays symmetric.
void set_block(Mat& target, const BlockLayout& layout, std::size_t i, std::size_t j, const Mat& value);
void set_sym_block(Mat& target, const BlockLayout& layout, std::size_t i, std::size_t j, const Mat& value);
Mat get_block(const Mat& source, const BlockLayout& layout, std::size_t i, std::size_t j);

Mat block_diag(const std::vector<Mat>& blocks);
Mat sym_part(const Mat& m);

// Matrix square root of a symmetric PSD matrix via eigen decomposition.
Mat sqrtm_psd(const Mat& m);

// det(sE - A) evaluated at s.
double pencil_det(const Mat& e, const Mat& a, double s);

} // namespace ncts
