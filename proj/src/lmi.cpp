#include "ncts/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>

namespace ncts {

using nlohmann::json;

// ---------------------------------------------------------------- AffineMat

AffineMat::AffineMat(Eigen::Index rows, Eigen::Index cols) : constant_(Mat::Zero(rows, cols)) {}

AffineMat::AffineMat(const Mat& constant) : constant_(constant) {}

AffineMat AffineMat::variable(int index, const Mat& coefficient) {
    AffineMat a(coefficient.rows(), coefficient.cols());
    a.terms_.emplace(index, coefficient);
    return a;
}

bool AffineMat::is_zero() const {
    if (!constant_.isZero(0.0)) {
        return false;
    }
    return std::all_of(terms_.begin(), terms_.end(), [](const auto& t) { return t.second.isZero(0.0); });
}

Mat AffineMat::evaluate(const Vec& x) const {
    Mat out = constant_;
    for (const auto& [k, c] : terms_) {
        if (k >= x.size()) {
            throw DimensionError("assignment has " + std::to_string(x.size()) + " scalars, expression uses index " +
                                 std::to_string(k));
        }
        out += x(k) * c;
    }
    return out;
}

AffineMat AffineMat::transpose() const {
    AffineMat t(Mat(constant_.transpose()));
    for (const auto& [k, c] : terms_) {
        t.terms_.emplace(k, c.transpose());
    }
    return t;
}

AffineMat& AffineMat::operator+=(const AffineMat& o) {
    if (o.rows() != rows() || o.cols() != cols()) {
        throw DimensionError("affine sum: " + std::to_string(rows()) + "x" + std::to_string(cols()) + " vs " +
                             std::to_string(o.rows()) + "x" + std::to_string(o.cols()));
    }
    constant_ += o.constant_;
    for (const auto& [k, c] : o.terms_) {
        auto it = terms_.find(k);
        if (it == terms_.end()) {
            terms_.emplace(k, c);
        } else {
            it->second += c;
        }
    }
    return *this;
}

AffineMat& AffineMat::operator-=(const AffineMat& o) { return *this += (-1.0) * o; }

AffineMat& AffineMat::operator*=(double s) {
    constant_ *= s;
    for (auto& [k, c] : terms_) {
        c *= s;
    }
    return *this;
}

AffineMat operator*(const Mat& left, const AffineMat& a) {
    if (left.cols() != a.rows()) {
        throw DimensionError("affine product: left factor has " + std::to_string(left.cols()) + " columns, operand " +
                             std::to_string(a.rows()) + " rows");
    }
    AffineMat out(Mat(left * a.constant_));
    for (const auto& [k, c] : a.terms_) {
        out.terms_.emplace(k, left * c);
    }
    return out;
}

AffineMat operator*(const AffineMat& a, const Mat& right) {
    if (a.cols() != right.rows()) {
        throw DimensionError("affine product: operand has " + std::to_string(a.cols()) + " columns, right factor " +
                             std::to_string(right.rows()) + " rows");
    }
    AffineMat out(Mat(a.constant_ * right));
    for (const auto& [k, c] : a.terms_) {
        out.terms_.emplace(k, c * right);
    }
    return out;
}

AffineMat He(const AffineMat& a) { return a + a.transpose(); }

namespace {

AffineMat place(Eigen::Index rows, Eigen::Index cols, Eigen::Index r0, Eigen::Index c0, const AffineMat& sub) {
    Mat left = Mat::Zero(rows, sub.rows());
    left.block(r0, 0, sub.rows(), sub.rows()).setIdentity();
    Mat right = Mat::Zero(sub.cols(), cols);
    right.block(0, c0, sub.cols(), sub.cols()).setIdentity();
    return left * sub * right;
}

Mat eye(Eigen::Index n) { return Mat::Identity(n, n); }

} // namespace

// ---------------------------------------------------------------- registry

RegistryEntry& VarRegistry::add_entry(RegistryEntry e) {
    if (index_.count(e.name) != 0) {
        throw AssemblyError("duplicate variable '" + e.name + "'");
    }
    index_[e.name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back();
}

AffineMat VarRegistry::add_symmetric(const std::string& name, Eigen::Index n, Cone cone) {
    RegistryEntry e;
    e.name = name;
    e.kind = VarKind::symmetric;
    e.cone = cone;
    e.rows = e.cols = n;
    e.expr = AffineMat(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            Mat basis = Mat::Zero(n, n);
            basis(i, j) = 1.0;
            basis(j, i) = 1.0;
            e.scalars.push_back(scalar_count_);
            e.expr += AffineMat::variable(scalar_count_, basis);
            owners_.push_back(name);
            ++scalar_count_;
        }
    }
    return add_entry(std::move(e)).expr;
}

AffineMat VarRegistry::add_full(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    RegistryEntry e;
    e.name = name;
    e.kind = VarKind::full;
    e.rows = rows;
    e.cols = cols;
    e.expr = AffineMat(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            Mat basis = Mat::Zero(rows, cols);
            basis(i, j) = 1.0;
            e.scalars.push_back(scalar_count_);
            e.expr += AffineMat::variable(scalar_count_, basis);
            owners_.push_back(name);
            ++scalar_count_;
        }
    }
    return add_entry(std::move(e)).expr;
}

AffineMat VarRegistry::add_scalar(const std::string& name, Cone cone, double lower_bound) {
    RegistryEntry e;
    e.name = name;
    e.kind = VarKind::scalar;
    e.cone = cone;
    e.rows = e.cols = 1;
    e.lower_bound = lower_bound;
    e.scalars.push_back(scalar_count_);
    e.expr = AffineMat::variable(scalar_count_, Mat::Ones(1, 1));
    owners_.push_back(name);
    ++scalar_count_;
    return add_entry(std::move(e)).expr;
}

AffineMat VarRegistry::add_structured(const std::string& name, const AffineMat& expr) {
    RegistryEntry e;
    e.name = name;
    e.kind = VarKind::structured;
    e.rows = expr.rows();
    e.cols = expr.cols();
    e.expr = expr;
    return add_entry(std::move(e)).expr;
}

const RegistryEntry& VarRegistry::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::out_of_range("unknown variable '" + name + "'");
    }
    return entries_[it->second];
}

Mat VarRegistry::value(const std::string& name, const Vec& x) const { return at(name).expr.evaluate(x); }

std::map<std::string, Mat> VarRegistry::assignment(const Vec& x) const {
    std::map<std::string, Mat> out;
    for (const auto& e : entries_) {
        out[e.name] = e.expr.evaluate(x);
    }
    return out;
}

Vec VarRegistry::pack(const std::map<std::string, Mat>& assignment) const {
    Vec x = Vec::Zero(scalar_count_);
    for (const auto& e : entries_) {
        if (e.kind == VarKind::structured) {
            continue;
        }
        auto it = assignment.find(e.name);
        if (it == assignment.end()) {
            throw std::out_of_range("assignment is missing variable '" + e.name + "'");
        }
        const Mat& v = it->second;
        if (v.rows() != e.rows || v.cols() != e.cols) {
            throw DimensionError("assignment for '" + e.name + "' has wrong shape");
        }
        std::size_t k = 0;
        if (e.kind == VarKind::symmetric) {
            for (Eigen::Index i = 0; i < e.rows; ++i) {
                for (Eigen::Index j = i; j < e.rows; ++j) {
                    x(e.scalars[k++]) = 0.5 * (v(i, j) + v(j, i));
                }
            }
        } else {
            for (Eigen::Index i = 0; i < e.rows; ++i) {
                for (Eigen::Index j = 0; j < e.cols; ++j) {
                    x(e.scalars[k++]) = v(i, j);
                }
            }
        }
    }
    return x;
}

namespace {

const char* kind_name(VarKind k) {
    switch (k) {
    case VarKind::symmetric:
        return "symmetric";
    case VarKind::full:
        return "full";
    case VarKind::scalar:
        return "scalar";
    case VarKind::structured:
        return "structured";
    }
    return "?";
}

const char* cone_name(Cone c) {
    switch (c) {
    case Cone::none:
        return "free";
    case Cone::positive_definite:
        return "pd";
    case Cone::positive_semidefinite:
        return "psd";
    case Cone::lower_bounded:
        return "lower_bounded";
    }
    return "?";
}

} // namespace

json VarRegistry::to_json() const {
    json out = json::array();
    for (const auto& e : entries_) {
        json j{{"name", e.name},
               {"kind", kind_name(e.kind)},
               {"cone", cone_name(e.cone)},
               {"shape", {e.rows, e.cols}},
               {"scalars", e.scalars}};
        if (e.cone == Cone::lower_bounded) {
            j["lower_bound"] = e.lower_bound;
        }
        out.push_back(j);
    }
    return out;
}

// ---------------------------------------------------------------- constraints

const char* to_string(Sense s) {
    switch (s) {
    case Sense::negative_definite:
        return "<0";
    case Sense::positive_semidefinite:
        return ">=0";
    case Sense::zero:
        return "=0";
    }
    return "?";
}

Mat LmiConstraint::evaluate(const Vec& x) const {
    Mat out = constant;
    for (const auto& [k, c] : coefficients) {
        out += x(k) * c;
    }
    return out;
}

double LmiConstraint::strict_margin() const { return 1e-7 * (1.0 + constant.norm()); }

void BlockAssembler::add(std::size_t i, std::size_t j, const AffineMat& value) {
    if (i < 1 || j < 1 || i > layout_.count() || j > layout_.count()) {
        throw AssemblyError("block (" + std::to_string(i) + "," + std::to_string(j) + ") outside layout of " +
                            std::to_string(layout_.count()) + " blocks");
    }
    if (i > j) {
        add(j, i, value.transpose());
        return;
    }
    const auto r = static_cast<Eigen::Index>(layout_.size(i));
    const auto c = static_cast<Eigen::Index>(layout_.size(j));
    if (value.rows() != r || value.cols() != c) {
        std::ostringstream os;
        os << "block (" << i << "," << j << "): expected " << r << "x" << c << ", got " << value.rows() << "x"
           << value.cols();
        throw AssemblyError(os.str());
    }
    auto key = std::make_pair(i, j);
    auto it = blocks_.find(key);
    if (it == blocks_.end()) {
        blocks_.emplace(key, value);
    } else {
        it->second += value;
    }
}

AffineMat BlockAssembler::block(std::size_t i, std::size_t j) const {
    if (i > j) {
        return block(j, i).transpose();
    }
    auto it = blocks_.find({i, j});
    if (it == blocks_.end()) {
        return AffineMat(static_cast<Eigen::Index>(layout_.size(i)), static_cast<Eigen::Index>(layout_.size(j)));
    }
    return it->second;
}

LmiConstraint BlockAssembler::finalize(const std::string& name, Sense sense) const {
    LmiConstraint c;
    c.name = name;
    c.sense = sense;
    c.layout = layout_;
    const auto n = static_cast<Eigen::Index>(layout_.total());
    c.constant = Mat::Zero(n, n);
    auto check_diag = [&](std::size_t i, const Mat& m) {
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw AssemblyError(name + ": diagonal block (" + std::to_string(i) + "," + std::to_string(i) +
                                ") is not symmetric");
        }
    };
    for (const auto& [key, value] : blocks_) {
        const auto [i, j] = key;
        if (i == j) {
            check_diag(i, value.constant());
            set_block(c.constant, layout_, i, i, sym_part(value.constant()));
        } else {
            set_sym_block(c.constant, layout_, i, j, value.constant());
        }
        for (const auto& [k, coef] : value.terms()) {
            if (coef.isZero(0.0)) {
                continue;
            }
            auto it = c.coefficients.find(k);
            if (it == c.coefficients.end()) {
                it = c.coefficients.emplace(k, Mat::Zero(n, n)).first;
            }
            if (i == j) {
                check_diag(i, coef);
                Mat cur = get_block(it->second, layout_, i, i);
                set_block(it->second, layout_, i, i, cur + sym_part(coef));
            } else {
                Mat cur = get_block(it->second, layout_, i, j);
                set_sym_block(it->second, layout_, i, j, cur + coef);
            }
        }
    }
    return c;
}

const LmiConstraint& LmiSystem::constraint(const std::string& name) const {
    for (const auto& c : constraints) {
        if (c.name == name) {
            return c;
        }
    }
    throw std::out_of_range("no constraint named '" + name + "'");
}

double LmiSystem::strict_margin() const {
    double d = 0.0;
    for (const auto& c : constraints) {
        if (c.sense == Sense::negative_definite) {
            d = std::max(d, c.strict_margin());
        }
    }
    return d;
}

// ---------------------------------------------------------------- scalars

bool is_theorem_scalar(const std::string& key) {
    return key == "eps1" || key == "eps2" || key == "eps3" || key == "eps4" || key == "eps_f" ||
           key == "eps_tilde_min";
}

void apply_override(TheoremScalars& s, const std::string& key, double value) {
    if (key == "eps1") {
        s.eps1 = value;
    } else if (key == "eps2") {
        s.eps2 = value;
    } else if (key == "eps3") {
        s.eps3 = value;
    } else if (key == "eps4") {
        s.eps4 = value;
    } else if (key == "eps_f") {
        s.eps_f = value;
    } else if (key == "eps_tilde_min") {
        s.eps_tilde_min = value;
    } else {
        throw std::invalid_argument("unknown scalar '" + key + "'");
    }
}

// ---------------------------------------------------------------- X2 structure

StructuredVar parameterize_X2(VarRegistry& reg, const Mat& E, const std::string& name) {
    if (E.rows() != E.cols()) {
        throw DimensionError("parameterize_X2: E must be square");
    }
    StructuredVar out;
    out.dae = dae_coordinates(E);
    const auto n = E.rows();
    const auto r = static_cast<Eigen::Index>(out.dae.rank);
    AffineMat inner(n, n);
    if (r > 0) {
        AffineMat s = reg.add_symmetric(name + "_S", r, Cone::positive_semidefinite);
        Mat sigma_inv = out.dae.sigma.head(r).cwiseInverse().asDiagonal();
        inner += place(n, n, 0, 0, sigma_inv * s);
        out.psd_block = s;
    }
    if (n - r > 0) {
        if (r > 0) {
            inner += place(n, n, r, 0, reg.add_full(name + "_21", n - r, r));
        }
        inner += place(n, n, r, r, reg.add_full(name + "_22", n - r, n - r));
    }
    out.value = reg.add_structured(name, out.dae.V * inner * Mat(out.dae.U.transpose()));
    return out;
}

// ---------------------------------------------------------------- theorems

namespace {

struct Vars {
    AffineMat X1, X2, Q1, Q2, Q3, Q4, Q4t, Z1, Z2, R1, R2, R3, W, Y1, Y2;
    std::array<AffineMat, 4> M, N, S;
    std::optional<AffineMat> X2_S;
};

Vars register_variables(VarRegistry& reg, const CascadeModel& md) {
    const auto n1 = static_cast<Eigen::Index>(md.n1());
    const auto n2 = static_cast<Eigen::Index>(md.n2());
    const auto m = static_cast<Eigen::Index>(md.m());
    Vars v;
    v.X1 = reg.add_symmetric("X1", n1, Cone::positive_definite);
    auto x2 = parameterize_X2(reg, md.E);
    v.X2 = x2.value;
    v.X2_S = x2.psd_block;
    v.Q1 = reg.add_symmetric("Q1", n1, Cone::positive_definite);
    v.Q2 = reg.add_symmetric("Q2", n1, Cone::positive_definite);
    v.Q3 = reg.add_symmetric("Q3", n1, Cone::positive_definite);
    v.Q4 = reg.add_symmetric("Q4", n2, Cone::positive_definite);
    v.Q4t = reg.add_symmetric("Q4_tilde", n2, Cone::positive_definite);
    v.Z1 = reg.add_symmetric("Z1", n2, Cone::positive_definite);
    v.Z2 = reg.add_symmetric("Z2", n2, Cone::positive_definite);
    v.R1 = reg.add_symmetric("R1", n1, Cone::positive_definite);
    v.R2 = reg.add_symmetric("R2", n1, Cone::positive_definite);
    v.R3 = reg.add_symmetric("R3", n1, Cone::positive_definite);
    v.W = reg.add_symmetric("W_hat", n1, Cone::positive_definite);
    v.Y1 = reg.add_full("Y1", m, n1);
    v.Y2 = reg.add_full("Y2", m, n2);
    for (int k = 0; k < 4; ++k) {
        v.M[k] = reg.add_full("M" + std::to_string(k + 1), n1, n1);
    }
    for (int k = 0; k < 4; ++k) {
        v.N[k] = reg.add_full("N" + std::to_string(k + 1), n1, n1);
    }
    for (int k = 0; k < 4; ++k) {
        v.S[k] = reg.add_full("S" + std::to_string(k + 1), n1, n1);
    }
    return v;
}

// A G-dependent term coef * L * G * Y1 placed at block (row, col), with L = B2
// (input_matrix) or the identity.
struct FaultTerm {
    std::size_t row;
    std::size_t col;
    bool input_matrix;
    double coef;
};

class Housing {
public:
    explicit Housing(std::map<std::string, std::string>& table) : table_(table) {}
    void house(const std::string& symbol, const std::string& rule) {
        if (!table_.emplace(symbol, rule).second) {
            throw AssemblyError("symbol " + symbol + " housed twice");
        }
    }

private:
    std::map<std::string, std::string>& table_;
};

std::string entry_symbol(std::size_t i, std::size_t j) {
    return "Omega_check(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

constexpr std::size_t kMainBlocks = 22;

// Main block of (16) plus its augmentation, with fault matrix G.
BlockAssembler assemble_main(LmiSystem& sys, const CascadeModel& md, const Mat& G, const TheoremScalars& sc,
                             const Vars& v, std::vector<FaultTerm>* faults) {
    const auto n1 = md.n1();
    const auto n2 = md.n2();
    const auto m = md.m();
    const auto q = md.q();
    const auto qy = md.qy();
    const auto em = static_cast<Eigen::Index>(m);
    const auto eq = static_cast<Eigen::Index>(q);
    const auto eqy = static_cast<Eigen::Index>(qy);
    const auto en1 = static_cast<Eigen::Index>(n1);
    const auto en2 = static_cast<Eigen::Index>(n2);

    const double ab = md.alpha_bar;
    const double bb = md.beta_bar;
    const double a1 = 1.0 - ab;
    const double b1 = 1.0 - bb;
    const double sig = std::sqrt(bernoulli_moments(ab).variance);
    const double dl = std::sqrt(bernoulli_moments(bb).variance);
    const double eps = md.saturation_slope;
    const double thb = md.theta_bar;
    const double p4 = std::numbers::pi * std::numbers::pi / 4.0;
    const auto& dq = md.dissipativity;
    const Mat Qb = dq.Q_bar();

    sys.parameters = {{"alpha_bar", ab},   {"beta_bar", bb},       {"sigma", sig},     {"delta", dl},
                      {"epsilon", eps},    {"eps1", sc.eps1},      {"eps2", sc.eps2},  {"eps3", sc.eps3},
                      {"eps4", sc.eps4},   {"eps_f", sc.eps_f},    {"mu", md.mu},      {"gamma", dq.gamma},
                      {"zeta2", md.zeta2}, {"d2", md.d2},          {"tau2", md.tau2},  {"theta_bar", thb},
                      {"lambda", md.lambda}};

    std::vector<std::size_t> sizes(13, n1);
    sizes.insert(sizes.end(), 5, n2);
    sizes.insert(sizes.end(), {n1, n1, m, q});
    std::vector<std::string> names;
    for (std::size_t i = 1; i <= kMainBlocks; ++i) {
        names.push_back("main" + std::to_string(i));
    }
    BlockAssembler b(BlockLayout(sizes, names));
    Housing h(sys.symbols);

    const AffineMat U1 = Mat(md.B2 * G) * v.Y1; // Upsilon_bar_1
    const AffineMat U2 = md.B2 * v.Y2;          // Upsilon_bar_2
    const AffineMat GY = G * v.Y1;
    h.house("Upsilon_bar_1", "B2 G Y1");
    h.house("Upsilon_bar_2", "B2 Y2");
    const AffineMat EZE = Mat(md.E.transpose()) * v.Z2 * md.E;

    auto put = [&](std::size_t i, std::size_t j, const AffineMat& val) {
        b.add(i, j, val);
        h.house(entry_symbol(std::min(i, j), std::max(i, j)), "main block");
    };
    auto fault_term = [&](std::size_t row, std::size_t col, bool input_matrix, double coef) {
        if (faults != nullptr) {
            faults->push_back({row, col, input_matrix, coef});
        }
    };

    put(1, 1, He(md.A1 * v.X1) + v.Q1 + v.Q2 + v.Q3 - 4.0 * (v.R1 + v.R2 + v.R3));
    struct Group {
        std::size_t o;
        const AffineMat* R;
        const std::array<AffineMat, 4>* U;
        const AffineMat* Q;
    };
    const Group groups[] = {{0, &v.R1, &v.M, &v.Q1}, {4, &v.R2, &v.N, &v.Q2}, {8, &v.R3, &v.S, &v.Q3}};
    for (const auto& g : groups) {
        const AffineMat& R = *g.R;
        const auto& U = *g.U;
        const std::size_t o = g.o;
        auto T = [](const AffineMat& a) { return a.transpose(); };
        put(1, 2 + o, -2.0 * R - T(U[0] + U[1] + U[2] + U[3]));
        put(1, 3 + o, T(U[0] + U[1] - U[2] - U[3]));
        put(1, 4 + o, 6.0 * R);
        put(1, 5 + o, 2.0 * T(U[2] + U[3]));
        AffineMat d22 = -8.0 * R + He(T(U[0] - U[1] + U[2] - U[3]));
        if (o == 4) {
            d22 += md.mu * v.W;
        }
        put(2 + o, 2 + o, d22);
        put(2 + o, 3 + o, -2.0 * R + T(-U[0] + U[1] + U[2] - U[3]));
        put(2 + o, 4 + o, 6.0 * R + 2.0 * T(U[1] + U[3]));
        put(2 + o, 5 + o, 6.0 * R - 2.0 * T(U[2]) + 2.0 * T(U[3]));
        put(3 + o, 3 + o, -4.0 * R - *g.Q);
        put(3 + o, 4 + o, -2.0 * T(U[1]) + 2.0 * T(U[3]));
        put(3 + o, 5 + o, 6.0 * R);
        put(4 + o, 4 + o, -12.0 * R);
        put(4 + o, 5 + o, -4.0 * T(U[3]));
        put(5 + o, 5 + o, -12.0 * R);
    }

    put(1, 14, Mat(md.B1 * md.C2) * v.X2);
    put(1, 22, AffineMat(Mat(md.B1 * md.D2)) - v.X1 * Mat(md.C1.transpose() * dq.S));
    put(14, 2, b1 * ab * U1);
    fault_term(14, 2, true, b1 * ab);
    put(14, 6, b1 * a1 * U1);
    fault_term(14, 6, true, b1 * a1);

    put(14, 14, v.Q4 + v.Q4t + He(md.A2 * v.X2 + U2) - (1.0 + p4) * EZE);
    put(14, 15, md.A3 * v.X2 + (1.0 - p4) * EZE);
    put(14, 17, p4 * EZE);
    put(14, 19, b1 * a1 * U1);
    fault_term(14, 19, true, b1 * a1);
    put(14, 20, bb * U1);
    fault_term(14, 20, true, bb);
    put(14, 21, AffineMat(Mat(-md.B2)));
    put(14, 22, AffineMat(md.B3));
    put(15, 15, -2.0 * (1.0 + p4) * EZE - (1.0 - md.lambda) * v.Q4t);
    put(15, 16, (1.0 - p4) * EZE);
    put(15, 17, p4 * EZE);
    put(15, 18, p4 * EZE);
    put(16, 16, -1.0 * v.Q4 - (1.0 + p4) * EZE);
    put(16, 18, p4 * EZE);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    put(17, 17, -pi2 * EZE - (1.0 / thb) * v.Z1);
    put(18, 18, -pi2 * EZE - (1.0 / thb) * v.Z1);
    put(19, 19, -1.0 * v.W);
    put(20, 20, AffineMat(Mat(-bb * eye(en1))));
    put(21, 21, AffineMat(Mat(-eye(em))));
    put(22, 22, AffineMat(Mat(-sym_part(md.D1.transpose() * dq.S) - dq.R + dq.gamma * eye(eq))));

    // Augmented columns: each row is a list of (main column, entry) pairs,
    // placed as coef * entry^T in column j of the new block.
    struct Entry {
        std::size_t col;
        AffineMat value;
        int fault = 0; // 0: none, 1: B2 G Y1, 2: G Y1
        double fault_coef = 0.0;
    };
    struct AugRow {
        std::string symbol;
        double coef;
        std::vector<Entry> entries;
        std::size_t width;
        AffineMat diag;
    };
    auto u1 = [&](std::size_t col, double c) { return Entry{col, c * U1, 1, c}; };
    auto gy = [&](std::size_t col, double c) { return Entry{col, c * GY, 2, c}; };
    auto plain = [](std::size_t col, const AffineMat& a) { return Entry{col, a, 0, 0.0}; };

    const std::vector<Entry> om1 = {plain(1, md.A1 * v.X1), plain(14, Mat(md.B1 * md.C2) * v.X2),
                                    plain(22, AffineMat(Mat(md.B1 * md.D2)))};
    const std::vector<Entry> om2 = {u1(2, ab * b1),
                                    u1(6, a1 * b1),
                                    plain(14, md.A2 * v.X2 + U2),
                                    plain(15, md.A3 * v.X2),
                                    u1(19, a1 * b1),
                                    u1(20, bb),
                                    plain(21, AffineMat(Mat(-md.B2))),
                                    plain(22, AffineMat(md.B3))};
    const std::vector<Entry> om3 = {u1(2, sig * b1), u1(6, sig * b1), u1(19, sig * b1)};
    const std::vector<Entry> om4 = {u1(2, -dl * a1), u1(6, -dl * a1), u1(19, -dl * a1), u1(20, dl * a1)};
    const std::vector<Entry> om5 = {u1(2, sig * dl), u1(6, -sig * dl), u1(19, -sig * dl)};
    const std::vector<Entry> om6 = {gy(2, b1 * ab), gy(6, b1 * a1), plain(14, v.Y2), gy(19, b1 * a1), gy(20, bb)};
    const std::vector<Entry> om7 = {gy(2, b1), gy(6, -b1), gy(19, -b1)};
    const std::vector<Entry> om8 = {gy(2, -ab), gy(6, -a1), gy(19, -a1), gy(20, 1.0)};
    const std::vector<Entry> om9 = {gy(2, -1.0), gy(6, 1.0), gy(19, 1.0)};
    const std::vector<Entry> om10 = {plain(10, Mat(std::sqrt(bb) * md.F) * v.X1)};
    const std::vector<Entry> om11 = {plain(1, Mat(Qb * md.C1) * v.X1), plain(22, AffineMat(Mat(Qb * md.D1)))};

    const AffineMat k1 = -2.0 * sc.eps1 * v.X1 + sc.eps1 * sc.eps1 * v.R1;
    const AffineMat k2 = -2.0 * sc.eps2 * v.X1 + sc.eps2 * sc.eps2 * v.R2;
    const AffineMat k3 = -2.0 * sc.eps3 * v.X1 + sc.eps3 * sc.eps3 * v.R3;
    const AffineMat k4 = -sc.eps4 * He(v.X2) + sc.eps4 * sc.eps4 * v.Z2;
    h.house("kappa_1", "augmented diagonal 1");
    h.house("kappa_2", "augmented diagonal 2");
    h.house("kappa_3", "augmented diagonal 3");
    h.house("kappa_4", "augmented diagonal 4-7");
    const AffineMat Im(Mat(-eye(em)));
    const double se = std::sqrt(eps);

    const std::vector<AugRow> rows = {
        {"Omega_hat_1", md.zeta2, om1, n1, k1},
        {"", md.d2, om1, n1, k2},
        {"", md.tau2, om1, n1, k3},
        {"Omega_hat_2", thb, om2, n2, k4},
        {"Omega_hat_3", thb, om3, n2, k4},
        {"Omega_hat_4", thb, om4, n2, k4},
        {"Omega_hat_5", thb, om5, n2, k4},
        {"Omega_hat_6", se, om6, m, Im},
        {"Omega_hat_7", se * sig, om7, m, Im},
        {"Omega_hat_8", se * dl, om8, m, Im},
        {"Omega_hat_9", se * sig * dl, om9, m, Im},
        {"Omega_hat_10", 1.0, om10, n1, AffineMat(Mat(-eye(en1)))},
        {"Omega_hat_11", 1.0, om11, qy, AffineMat(Mat(-eye(eqy)))},
    };
    (void)en2;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& row = rows[k];
        const std::size_t r = b.layout().append(row.width, "aug" + std::to_string(k + 1));
        if (!row.symbol.empty()) {
            h.house(row.symbol, "augmented column " + std::to_string(r));
        }
        for (const auto& e : row.entries) {
            b.add(r, e.col, row.coef * e.value);
            if (e.fault != 0) {
                fault_term(r, e.col, e.fault == 1, row.coef * e.fault_coef);
            }
        }
        b.add(r, r, row.diag);
    }
    return b;
}

void add_side_constraints(LmiSystem& sys, const CascadeModel& md, const Vars& v) {
    Housing h(sys.symbols);
    const auto n1 = md.n1();
    auto wirtinger = [&](const std::string& name, const AffineMat& R, const std::array<AffineMat, 4>& U,
                         const std::string& symbol) {
        BlockAssembler b(BlockLayout({n1, n1, n1, n1}, {"r", "3r", "u_a", "u_b"}));
        b.add(1, 1, R);
        b.add(2, 2, 3.0 * R);
        b.add(3, 3, R);
        b.add(4, 4, 3.0 * R);
        b.add(1, 3, U[0].transpose());
        b.add(1, 4, U[2].transpose());
        b.add(2, 3, U[1].transpose());
        b.add(2, 4, U[3].transpose());
        sys.constraints.push_back(b.finalize(name, Sense::positive_semidefinite));
        h.house(symbol, name);
    };
    wirtinger("slack_R1", v.R1, v.M, "U_hat_1");
    wirtinger("slack_R2", v.R2, v.N, "U_hat_2");
    wirtinger("slack_R3", v.R3, v.S, "U_hat_3");

    // Delay-free secondary loop block used for the admissibility argument.
    {
        BlockAssembler b(BlockLayout({md.n2()}, {"x2"}));
        b.add(1, 1, v.Q4 + v.Q4t + He(md.A2 * v.X2 + md.B2 * v.Y2));
        sys.constraints.push_back(b.finalize("admissibility", Sense::negative_definite));
    }

    for (const auto& e : sys.registry.entries()) {
        if (e.cone == Cone::none || e.kind == VarKind::structured) {
            continue;
        }
        BlockAssembler b(BlockLayout({static_cast<std::size_t>(e.rows)}, {e.name}));
        const std::string name = e.name == "X2_S" ? "x2_structure" : "cone_" + e.name;
        switch (e.cone) {
        case Cone::positive_definite:
            b.add(1, 1, -1.0 * e.expr);
            sys.constraints.push_back(b.finalize(name, Sense::negative_definite));
            break;
        case Cone::positive_semidefinite:
            b.add(1, 1, e.expr);
            sys.constraints.push_back(b.finalize(name, Sense::positive_semidefinite));
            break;
        case Cone::lower_bounded:
            b.add(1, 1, e.expr - AffineMat(Mat::Constant(1, 1, e.lower_bound)));
            sys.constraints.push_back(b.finalize(name, Sense::positive_semidefinite));
            break;
        case Cone::none:
            break;
        }
    }
    for (const auto& name : {"X1", "X2", "Q1", "Q2", "Q3", "Q4", "Q4_tilde", "Z1", "Z2", "R1", "R2", "R3",
                             "W_hat", "Y1", "Y2"}) {
        h.house(name, "registry");
    }
    for (const char* p : {"M", "N", "S"}) {
        for (int k = 1; k <= 4; ++k) {
            h.house(std::string(p) + std::to_string(k), "registry");
        }
    }
}

void check_fault(const CascadeModel& md, const Mat& G) {
    const auto m = static_cast<Eigen::Index>(md.m());
    if (G.rows() != m || G.cols() != m) {
        throw DimensionError("fault matrix must be " + std::to_string(m) + "x" + std::to_string(m));
    }
    if (!(G - Mat(G.diagonal().asDiagonal())).isZero(0.0)) {
        throw std::invalid_argument("fault matrix must be diagonal");
    }
}

void check_model(const CascadeModel& md) {
    const auto report = validate(md);
    if (!report.ok()) {
        throw std::invalid_argument("invalid model:\n" + report.summary());
    }
}

void require_symbols(const LmiSystem& sys, const std::vector<std::string>& required) {
    const auto missing = missing_symbols(required, sys.symbols);
    if (!missing.empty()) {
        std::string list;
        for (const auto& s : missing) {
            list += " " + s;
        }
        throw AssemblyError("unmapped symbols:" + list);
    }
}

} // namespace

std::vector<std::string> theorem1_symbols() {
    std::set<std::pair<std::size_t, std::size_t>> main = {{1, 1}};
    for (std::size_t o : {0u, 4u, 8u}) {
        for (auto [i, j] : std::initializer_list<std::pair<std::size_t, std::size_t>>{
                 {1, 2}, {1, 3}, {1, 4}, {1, 5}, {2, 2}, {2, 3}, {2, 4}, {2, 5}, {3, 3}, {3, 4}, {3, 5}, {4, 4},
                 {4, 5}, {5, 5}}) {
            main.insert({i == 1 ? 1 : i + o, j + o});
        }
    }
    for (auto p : std::initializer_list<std::pair<std::size_t, std::size_t>>{
             {1, 14}, {1, 22}, {2, 14}, {6, 14}, {14, 14}, {14, 15}, {14, 17}, {14, 19}, {14, 20}, {14, 21}, {14, 22},
             {15, 15}, {15, 16}, {15, 17}, {15, 18}, {16, 16}, {16, 18}, {17, 17}, {18, 18}, {19, 19}, {20, 20},
             {21, 21}, {22, 22}}) {
        main.insert(p);
    }
    std::vector<std::string> out;
    for (auto [i, j] : main) {
        out.push_back(entry_symbol(i, j));
    }
    for (int k = 1; k <= 11; ++k) {
        out.push_back("Omega_hat_" + std::to_string(k));
    }
    for (int k = 1; k <= 4; ++k) {
        out.push_back("kappa_" + std::to_string(k));
    }
    for (int k = 1; k <= 3; ++k) {
        out.push_back("U_hat_" + std::to_string(k));
    }
    for (const char* s : {"Upsilon_bar_1", "Upsilon_bar_2", "X1", "X2", "Q1", "Q2", "Q3", "Q4", "Q4_tilde", "Z1",
                          "Z2", "R1", "R2", "R3", "W_hat", "Y1", "Y2"}) {
        out.emplace_back(s);
    }
    for (const char* p : {"M", "N", "S"}) {
        for (int k = 1; k <= 4; ++k) {
            out.push_back(std::string(p) + std::to_string(k));
        }
    }
    return out;
}

std::vector<std::string> theorem2_symbols() {
    auto out = theorem1_symbols();
    out.emplace_back("Theta");
    out.emplace_back("B_tilde");
    out.emplace_back("eps_tilde");
    for (int k = 1; k <= 8; ++k) {
        out.push_back("B_tilde_" + std::to_string(k));
        out.push_back("Y_tilde_" + std::to_string(k));
    }
    return out;
}

std::vector<std::string> missing_symbols(const std::vector<std::string>& required,
                                         const std::map<std::string, std::string>& housed) {
    std::vector<std::string> out;
    for (const auto& s : required) {
        if (housed.count(s) == 0) {
            out.push_back(s);
        }
    }
    return out;
}

LmiSystem build_theorem1(const CascadeModel& md, const Mat& G, const TheoremScalars& sc) {
    check_model(md);
    check_fault(md, G);
    LmiSystem sys;
    const Vars v = register_variables(sys.registry, md);
    BlockAssembler main = assemble_main(sys, md, G, sc, v, nullptr);
    sys.constraints.push_back(main.finalize("main", Sense::negative_definite));
    add_side_constraints(sys, md, v);
    require_symbols(sys, theorem1_symbols());
    return sys;
}

LmiSystem build_theorem2(const CascadeModel& md, const TheoremScalars& sc) {
    check_model(md);
    LmiSystem sys;
    const Vars v = register_variables(sys.registry, md);
    const Mat G0 = md.fault.mean();
    const Mat G1 = md.fault.radius();
    std::vector<FaultTerm> faults;
    BlockAssembler b = assemble_main(sys, md, G0, sc, v, &faults);
    Housing h(sys.symbols);
    h.house("Theta", "main block with mean fault");

    const auto m = static_cast<Eigen::Index>(md.m());
    const AffineMat G1Y = G1 * v.Y1;
    // Pairs grouped by (fault column, left factor).
    const std::size_t cols[] = {2, 6, 19, 20};
    int pair = 0;
    for (bool input_matrix : {true, false}) {
        for (std::size_t col : cols) {
            ++pair;
            AffineMat eps = sys.registry.add_scalar("eps_tilde_" + std::to_string(pair), Cone::lower_bounded,
                                                    sc.eps_tilde_min);
            const int eps_index = eps.terms().begin()->first;
            const std::size_t cb = b.layout().append(static_cast<std::size_t>(m), "B_tilde_" + std::to_string(pair));
            const std::size_t cy = b.layout().append(static_cast<std::size_t>(m), "Y_tilde_" + std::to_string(pair));
            for (const auto& f : faults) {
                if (f.col != col || f.input_matrix != input_matrix) {
                    continue;
                }
                const auto rows = static_cast<Eigen::Index>(b.layout().size(f.row));
                const Mat L = input_matrix ? md.B2 : Mat(Mat::Identity(m, m));
                if (L.rows() != rows) {
                    throw AssemblyError("fault term at block (" + std::to_string(f.row) + "," +
                                        std::to_string(f.col) + ") does not tile");
                }
                b.add(f.row, cb, AffineMat::variable(eps_index, f.coef * L));
            }
            b.add(col, cy, G1Y.transpose());
            b.add(cb, cb, AffineMat::variable(eps_index, -Mat::Identity(m, m)));
            b.add(cy, cy, AffineMat::variable(eps_index, -Mat::Identity(m, m)));
            h.house("B_tilde_" + std::to_string(pair), "border column " + std::to_string(cb));
            h.house("Y_tilde_" + std::to_string(pair), "border column " + std::to_string(cy));
        }
    }
    h.house("B_tilde", "border columns");
    h.house("eps_tilde", "border diagonal");
    sys.constraints.push_back(b.finalize("main", Sense::negative_definite));
    add_side_constraints(sys, md, v);
    require_symbols(sys, theorem2_symbols());
    return sys;
}

// ---------------------------------------------------------------- SDPA

namespace {

struct BlockSpec {
    int size;            // negative for diagonal blocks
    const LmiConstraint* source = nullptr;
    bool box = false;
};

void emit(std::ostringstream& os, int matno, int blk, int i, int j, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d %d %d %d %.17g\n", matno, blk, i, j, v);
    os << buf;
}

} // namespace

std::string export_sdpa(const LmiSystem& sys, const SdpaOptions& opts) {
    for (const auto& c : sys.constraints) {
        if (c.sense == Sense::zero) {
            throw std::invalid_argument("export_sdpa: equality constraint '" + c.name +
                                        "' must be eliminated before export");
        }
    }
    const int nx = sys.registry.scalar_count();
    const bool epi = opts.objective == SdpaObjective::max_eig;
    const int m = nx + (epi ? 1 : 0);
    const int t_index = nx + 1; // 1-based matno of t

    std::vector<BlockSpec> blocks;
    for (const auto& c : sys.constraints) {
        blocks.push_back({static_cast<int>(c.size()), &c, false});
    }
    if (opts.box_bound && m > 0) {
        blocks.push_back({-(2 * nx + (epi ? 1 : 0)), nullptr, true});
    }

    std::ostringstream os;
    os << m << "\n" << blocks.size() << "\n";
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        os << (b ? " " : "") << blocks[b].size;
    }
    os << "\n";
    for (int k = 1; k <= m; ++k) {
        os << (k > 1 ? " " : "") << ((epi && k == t_index) ? 1 : 0);
    }
    os << "\n";

    // SDPA form: sum_k x_k F_k - F_0 >= 0. Each constraint is rewritten as
    // G0 + sum x_k G_k >= 0, so F_0 = -G0 and F_k = G_k.
    auto sign_of = [&](const LmiConstraint& c) { return c.sense == Sense::negative_definite ? -1.0 : 1.0; };
    auto write_upper = [&](int matno, int blk, const Mat& g) {
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            for (Eigen::Index j = i; j < g.cols(); ++j) {
                if (g(i, j) != 0.0) {
                    emit(os, matno, blk, static_cast<int>(i + 1), static_cast<int>(j + 1), g(i, j));
                }
            }
        }
    };

    for (int matno = 0; matno <= m; ++matno) {
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const int blk = static_cast<int>(b + 1);
            const auto& spec = blocks[b];
            if (spec.box) {
                const double bound = *opts.box_bound;
                // entries 2k-1: bound - x_k, 2k: bound + x_k, last: t + bound
                if (matno == 0) {
                    for (int k = 1; k <= 2 * nx + (epi ? 1 : 0); ++k) {
                        emit(os, 0, blk, k, k, -bound);
                    }
                } else if (matno <= nx) {
                    emit(os, matno, blk, 2 * matno - 1, 2 * matno - 1, -1.0);
                    emit(os, matno, blk, 2 * matno, 2 * matno, 1.0);
                } else {
                    emit(os, matno, blk, 2 * nx + 1, 2 * nx + 1, 1.0);
                }
                continue;
            }
            const LmiConstraint& c = *spec.source;
            const double s = sign_of(c);
            if (matno == 0) {
                Mat g0 = s * c.constant;
                if (c.sense == Sense::negative_definite && !epi) {
                    g0 -= c.strict_margin() * Mat::Identity(c.size(), c.size());
                }
                write_upper(0, blk, -g0);
            } else if (matno <= nx) {
                auto it = c.coefficients.find(matno - 1);
                if (it != c.coefficients.end()) {
                    write_upper(matno, blk, s * it->second);
                }
            } else {
                write_upper(matno, blk, Mat::Identity(c.size(), c.size()));
            }
        }
    }
    return os.str();
}

Mat SdpaProblem::matrix(int matno, int block) const {
    const int size = std::abs(block_struct.at(static_cast<std::size_t>(block - 1)));
    Mat out = Mat::Zero(size, size);
    for (const auto& e : entries) {
        if (e.matno == matno && e.block == block) {
            out(e.i - 1, e.j - 1) = e.value;
            out(e.j - 1, e.i - 1) = e.value;
        }
    }
    return out;
}

SdpaProblem parse_sdpa(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first != std::string::npos && (line[first] == '"' || line[first] == '*')) {
            continue;
        }
        for (char& ch : line) {
            if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') {
                ch = ' ';
            }
        }
        lines.push_back(line);
    }
    auto numbers = [](const std::string& l) {
        std::istringstream ls(l);
        std::vector<double> v;
        double d = 0.0;
        while (ls >> d) {
            v.push_back(d);
        }
        return v;
    };
    if (lines.size() < 2) {
        throw std::invalid_argument("sdpa: truncated header");
    }
    SdpaProblem p;
    auto head = numbers(lines[0]);
    auto nb = numbers(lines[1]);
    if (head.empty() || nb.empty()) {
        throw std::invalid_argument("sdpa: malformed header");
    }
    p.m = static_cast<int>(head[0]);
    const auto nblocks = static_cast<std::size_t>(nb[0]);
    std::size_t li = 2;
    if (nblocks > 0 || p.m > 0) {
        if (lines.size() < 4) {
            throw std::invalid_argument("sdpa: truncated header");
        }
        for (double d : numbers(lines[li++])) {
            p.block_struct.push_back(static_cast<int>(d));
        }
        if (p.block_struct.size() != nblocks) {
            throw std::invalid_argument("sdpa: block structure lists " + std::to_string(p.block_struct.size()) +
                                        " blocks, header says " + std::to_string(nblocks));
        }
        p.c = numbers(lines[li++]);
        if (static_cast<int>(p.c.size()) != p.m) {
            throw std::invalid_argument("sdpa: objective vector length mismatch");
        }
    } else {
        li = std::min<std::size_t>(lines.size(), 4);
    }
    for (; li < lines.size(); ++li) {
        auto v = numbers(lines[li]);
        if (v.empty()) {
            continue;
        }
        if (v.size() != 5) {
            throw std::invalid_argument("sdpa: malformed entry line " + std::to_string(li + 1));
        }
        SdpaEntry e{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3]),
                    v[4]};
        if (e.matno < 0 || e.matno > p.m || e.block < 1 || e.block > static_cast<int>(nblocks)) {
            throw std::invalid_argument("sdpa: entry out of range on line " + std::to_string(li + 1));
        }
        const int size = std::abs(p.block_struct[static_cast<std::size_t>(e.block - 1)]);
        if (e.i < 1 || e.j < 1 || e.i > size || e.j > size) {
            throw std::invalid_argument("sdpa: index out of range on line " + std::to_string(li + 1));
        }
        p.entries.push_back(e);
    }
    return p;
}

} // namespace ncts
