#include "ncts/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ncts {

Mat mat_from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        return Mat(0, 0);
    }
    const std::size_t cols = rows.front().size();
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) {
            throw DimensionError("ragged matrix rows");
        }
        for (std::size_t j = 0; j < cols; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

bool all_finite(const Mat& m) { return m.allFinite(); }

namespace {

void require_symmetric(const Mat& m) {
    if (m.rows() != m.cols()) {
        std::ostringstream os;
        os << "expected square matrix, got " << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
    if (m.size() == 0) {
        throw DimensionError("empty matrix has no eigenvalues");
    }
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
        std::ostringstream os;
        os << "matrix is not symmetric (max asymmetry " << asym << ")";
        throw DimensionError(os.str());
    }
}

} // namespace

Vec eigenvalues_sym(const Mat& m) {
    require_symmetric(m);
    Eigen::SelfAdjointEigenSolver<Mat> es(sym_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double min_eig_sym(const Mat& m) { return eigenvalues_sym(m).minCoeff(); }
double max_eig_sym(const Mat& m) { return eigenvalues_sym(m).maxCoeff(); }

std::size_t numeric_rank(const Mat& m, double rel_tol) {
    if (m.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<Mat> svd(m);
    const Vec& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) {
        return 0;
    }
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > rel_tol * s(0)) {
            ++r;
        }
    }
    return r;
}

DaeDecomposition dae_coordinates(const Mat& e) {
    if (e.rows() != e.cols()) {
        throw DimensionError("descriptor matrix must be square");
    }
    DaeDecomposition out;
    const auto n = e.rows();
    if (n == 0) {
        out.U = Mat(0, 0);
        out.V = Mat(0, 0);
        return out;
    }
    Eigen::JacobiSVD<Mat> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec& s = svd.singularValues();
    out.U = svd.matrixU();
    out.V = svd.matrixV();
    std::size_t r = 0;
    if (s(0) > 0.0) {
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            if (s(i) > kRankTolerance * s(0)) {
                ++r;
            }
        }
    }
    out.rank = r;
    out.sigma = s.head(static_cast<Eigen::Index>(r));
    // Canonical signs: make the largest-magnitude entry of each V column
    // positive so that already-canonical inputs come back as identity.
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index idx = 0;
        out.V.col(j).cwiseAbs().maxCoeff(&idx);
        if (out.V(idx, j) < 0.0) {
            out.V.col(j) *= -1.0;
            out.U.col(j) *= -1.0;
        }
    }
    return out;
}

BlockLayout::BlockLayout(std::vector<std::size_t> sizes, std::vector<std::string> names) {
    if (!names.empty() && names.size() != sizes.size()) {
        throw DimensionError("block name count does not match block count");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        append(sizes[i], names.empty() ? std::string{} : names[i]);
    }
}

std::size_t BlockLayout::append(std::size_t size, std::string name) {
    if (size == 0) {
        throw DimensionError("block sizes must be positive");
    }
    offsets_.push_back(total_);
    sizes_.push_back(size);
    total_ += size;
    const std::size_t index = sizes_.size();
    if (!name.empty()) {
        if (by_name_.count(name) != 0) {
            throw DimensionError("duplicate block name '" + name + "'");
        }
        by_name_[name] = index;
    }
    names_.push_back(std::move(name));
    return index;
}

std::size_t BlockLayout::size(std::size_t block) const {
    if (block == 0 || block > sizes_.size()) {
        throw DimensionError("block index " + std::to_string(block) + " out of range");
    }
    return sizes_[block - 1];
}

std::size_t BlockLayout::offset(std::size_t block) const {
    if (block == 0 || block > sizes_.size()) {
        throw DimensionError("block index " + std::to_string(block) + " out of range");
    }
    return offsets_[block - 1];
}

std::size_t BlockLayout::index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) {
        throw DimensionError("unknown block '" + name + "'");
    }
    return it->second;
}

const std::string& BlockLayout::name(std::size_t block) const {
    size(block);
    return names_[block - 1];
}

void set_block(Mat& target, const BlockLayout& layout, std::size_t i, std::size_t j, const Mat& value) {
    const auto ri = static_cast<Eigen::Index>(layout.size(i));
    const auto cj = static_cast<Eigen::Index>(layout.size(j));
    if (value.rows() != ri || value.cols() != cj) {
        std::ostringstream os;
        os << "block (" << i << "," << j << ") expects " << ri << "x" << cj << ", got " << value.rows() << "x"
           << value.cols();
        throw DimensionError(os.str());
    }
    target.block(static_cast<Eigen::Index>(layout.offset(i)), static_cast<Eigen::Index>(layout.offset(j)), ri, cj) =
        value;
}

void set_sym_block(Mat& target, const BlockLayout& layout, std::size_t i, std::size_t j, const Mat& value) {
    set_block(target, layout, i, j, value);
    if (i != j) {
        set_block(target, layout, j, i, value.transpose());
    }
}

Mat get_block(const Mat& source, const BlockLayout& layout, std::size_t i, std::size_t j) {
    return source.block(static_cast<Eigen::Index>(layout.offset(i)), static_cast<Eigen::Index>(layout.offset(j)),
                        static_cast<Eigen::Index>(layout.size(i)), static_cast<Eigen::Index>(layout.size(j)));
}

Mat block_diag(const std::vector<Mat>& blocks) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Mat out = Mat::Zero(rows, cols);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

Mat sym_part(const Mat& m) { return 0.5 * (m + m.transpose()); }

Mat sqrtm_psd(const Mat& m) {
    if (m.size() == 0) {
        return m;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(sym_part(m));
    Vec d = es.eigenvalues();
    if (d.minCoeff() < -1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff())) {
        throw std::domain_error("matrix square root of an indefinite matrix");
    }
    d = d.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

double pencil_det(const Mat& e, const Mat& a, double s) { return (s * e - a).determinant(); }

} // namespace ncts
