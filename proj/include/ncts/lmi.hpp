#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ncts/model.hpp"
#include "ncts/numerics.hpp"

namespace ncts {

// Matrix expression affine in the scalar decision variables:
// constant + sum_k x_k * coef_k.
class AffineMat {
public:
    AffineMat() = default;
    AffineMat(Eigen::Index rows, Eigen::Index cols);
    explicit AffineMat(const Mat& constant);

    static AffineMat zero(Eigen::Index rows, Eigen::Index cols) { return AffineMat(rows, cols); }
    static AffineMat variable(int index, const Mat& coefficient);

    Eigen::Index rows() const { return constant_.rows(); }
    Eigen::Index cols() const { return constant_.cols(); }
    const Mat& constant() const { return constant_; }
    const std::map<int, Mat>& terms() const { return terms_; }
    bool is_constant() const { return terms_.empty(); }
    bool is_zero() const;

    Mat evaluate(const Vec& x) const;
    AffineMat transpose() const;

    AffineMat& operator+=(const AffineMat& other);
    AffineMat& operator-=(const AffineMat& other);
    AffineMat& operator*=(double s);

    friend AffineMat operator+(AffineMat a, const AffineMat& b) { return a += b; }
    friend AffineMat operator-(AffineMat a, const AffineMat& b) { return a -= b; }
    friend AffineMat operator-(AffineMat a) { return a *= -1.0; }
    friend AffineMat operator*(double s, AffineMat a) { return a *= s; }
    friend AffineMat operator*(AffineMat a, double s) { return a *= s; }
    friend AffineMat operator*(const Mat& left, const AffineMat& a);
    friend AffineMat operator*(const AffineMat& a, const Mat& right);

private:
    Mat constant_;
    std::map<int, Mat> terms_;
};

AffineMat He(const AffineMat& a);

enum class VarKind { symmetric, full, scalar, structured };
enum class Cone { none, positive_definite, positive_semidefinite, lower_bounded };

struct RegistryEntry {
    std::string name;
    VarKind kind = VarKind::full;
    Cone cone = Cone::none;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::vector<int> scalars; // owned scalar indices (empty for structured)
    AffineMat expr;           // matrix expression in scalar variables
    double lower_bound = 0.0; // for Cone::lower_bounded
};

class VarRegistry {
public:
    AffineMat add_symmetric(const std::string& name, Eigen::Index n, Cone cone = Cone::none);
    AffineMat add_full(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    AffineMat add_scalar(const std::string& name, Cone cone = Cone::none, double lower_bound = 0.0);
    // A named matrix defined through other registered variables.
    AffineMat add_structured(const std::string& name, const AffineMat& expr);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const RegistryEntry& at(const std::string& name) const;
    const std::vector<RegistryEntry>& entries() const { return entries_; }
    int scalar_count() const { return scalar_count_; }
    const std::string& scalar_owner(int index) const { return owners_.at(static_cast<std::size_t>(index)); }

    Mat value(const std::string& name, const Vec& x) const;
    std::map<std::string, Mat> assignment(const Vec& x) const;
    // Inverse of assignment() over the primitive (non-structured) entries.
    Vec pack(const std::map<std::string, Mat>& assignment) const;

    nlohmann::json to_json() const;

private:
    RegistryEntry& add_entry(RegistryEntry e);

    std::vector<RegistryEntry> entries_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> owners_;
    int scalar_count_ = 0;
};

enum class Sense { negative_definite, positive_semidefinite, zero };
const char* to_string(Sense s);

struct LmiConstraint {
    std::string name;
    Sense sense = Sense::negative_definite;
    BlockLayout layout;
    Mat constant;
    std::map<int, Mat> coefficients; // full-size symmetric matrix per scalar variable

    Eigen::Index size() const { return constant.rows(); }
    Mat evaluate(const Vec& x) const;
    // Strictness margin for "< 0": 1e-7 * (1 + ||constant||_F).
    double strict_margin() const;
};

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Square block matrix under construction: blocks are stored on and above
// the diagonal and mirrored when finalized.
class BlockAssembler {
public:
    explicit BlockAssembler(BlockLayout layout) : layout_(std::move(layout)) {}

    // Adds to block (i, j); (i > j) is stored as the transpose at (j, i).
    void add(std::size_t i, std::size_t j, const AffineMat& value);
    const BlockLayout& layout() const { return layout_; }
    BlockLayout& layout() { return layout_; }
    AffineMat block(std::size_t i, std::size_t j) const;

    LmiConstraint finalize(const std::string& name, Sense sense) const;

private:
    BlockLayout layout_;
    std::map<std::pair<std::size_t, std::size_t>, AffineMat> blocks_;
};

struct LmiSystem {
    VarRegistry registry;
    std::vector<LmiConstraint> constraints;
    std::map<std::string, double> parameters;
    // symbol -> rule that houses it
    std::map<std::string, std::string> symbols;

    const LmiConstraint& constraint(const std::string& name) const;
    // Largest strict margin over the "< 0" constraints.
    double strict_margin() const;
};

// Fixed scalars of the synthesis conditions.
struct TheoremScalars {
    double eps1 = 1.0;
    double eps2 = 1.0;
    double eps3 = 1.0;
    double eps4 = 1.0;
    double eps_f = 1.0;
    double eps_tilde_min = 1e-6;
};

bool is_theorem_scalar(const std::string& key);
void apply_override(TheoremScalars& s, const std::string& key, double value);

// E X2 symmetric PSD through X2 = V [[Sigma^-1 S, 0], [X21, X22]] U^T with S >= 0.
struct StructuredVar {
    AffineMat value;
    std::optional<AffineMat> psd_block; // S, empty when rank(E) = 0
    DaeDecomposition dae;
};
StructuredVar parameterize_X2(VarRegistry& registry, const Mat& E, const std::string& name = "X2");

LmiSystem build_theorem1(const CascadeModel& model, const Mat& G, const TheoremScalars& scalars);
LmiSystem build_theorem2(const CascadeModel& model, const TheoremScalars& scalars);

// Symbols every assembly must house.
std::vector<std::string> theorem1_symbols();
std::vector<std::string> theorem2_symbols();
// Returns the required symbols not present in `housed`.
std::vector<std::string> missing_symbols(const std::vector<std::string>& required,
                                         const std::map<std::string, std::string>& housed);

// SDPA sparse format.
enum class SdpaObjective { feasibility, max_eig };
struct SdpaOptions {
    SdpaObjective objective = SdpaObjective::feasibility;
    std::optional<double> box_bound; // adds a diagonal block with |x_i| <= bound
};

struct SdpaEntry {
    int matno;
    int block;
    int i;
    int j;
    double value;
};
struct SdpaProblem {
    int m = 0;
    std::vector<int> block_struct;
    std::vector<double> c;
    std::vector<SdpaEntry> entries;

    // Dense F_k for block b (1-based), symmetric.
    Mat matrix(int matno, int block) const;
};

std::string export_sdpa(const LmiSystem& sys, const SdpaOptions& opts = {});
SdpaProblem parse_sdpa(const std::string& text);

} // namespace ncts
