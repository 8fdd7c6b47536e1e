#ifndef SPELUNK_NETWORK_HPP
#define SPELUNK_NETWORK_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "spelunk/error.hpp"

namespace spelunk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;

enum class ActivationKind { ReLU, ELU, Sin, Tanh, Identity };

enum class OutputSemantics { SDF, OccupancyLogit };

inline std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::ELU: return "elu";
        case ActivationKind::Sin: return "sin";
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::Identity: return "identity";
    }
    return "?";
}

inline std::string_view to_string(OutputSemantics s) {
    return s == OutputSemantics::SDF ? "sdf" : "occupancy_logit";
}

/// Pointwise activation. ELU uses unit scale.
inline double activate(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::ReLU: return x > 0.0 ? x : 0.0;
        case ActivationKind::ELU: return x > 0.0 ? x : std::expm1(x);
        case ActivationKind::Sin: return std::sin(x);
        case ActivationKind::Tanh: return std::tanh(x);
        case ActivationKind::Identity: return x;
    }
    return x;
}

struct DenseLayer {
    Matrix weights; // out_dim x in_dim; weights(i, j) multiplies input j into output i
    Vector bias;    // out_dim

    Eigen::Index in_dim() const { return weights.cols(); }
    Eigen::Index out_dim() const { return weights.rows(); }
};

using Layer = std::variant<DenseLayer, ActivationKind>;

/// An immutable MLP f: R^d -> R. Construction validates shapes and weights;
/// negative output means inside.
class NetworkSpec {
public:
    NetworkSpec(int input_dim, std::vector<Layer> layers,
                OutputSemantics semantics = OutputSemantics::SDF, std::string name = {})
        : input_dim_(input_dim), layers_(std::move(layers)), semantics_(semantics),
          name_(std::move(name)) {
        validate();
        for (const auto& layer : layers_) {
            if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
                abs_weights_.push_back(dense->weights.cwiseAbs());
            } else {
                abs_weights_.emplace_back();
            }
        }
    }

    int input_dim() const { return input_dim_; }
    const std::vector<Layer>& layers() const { return layers_; }
    OutputSemantics output_semantics() const { return semantics_; }
    const std::string& name() const { return name_; }

    /// Elementwise |W| of the dense layer at `layer_index` (empty for activations).
    const Matrix& abs_weights(std::size_t layer_index) const { return abs_weights_[layer_index]; }

    /// Widest intermediate vector, including the input.
    Eigen::Index max_width() const {
        Eigen::Index w = input_dim_;
        for (const auto& layer : layers_) {
            if (const auto* dense = std::get_if<DenseLayer>(&layer)) w = std::max(w, dense->out_dim());
        }
        return w;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& layer : layers_) {
            if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
                n += static_cast<std::size_t>(dense->weights.size() + dense->bias.size());
            }
        }
        return n;
    }

private:
    void validate() const {
        if (input_dim_ < 1) throw Error(ErrorCode::InvalidParameter, "input_dim must be positive");
        Eigen::Index width = input_dim_;
        bool has_dense = false;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto* dense = std::get_if<DenseLayer>(&layers_[i]);
            if (!dense) continue;
            has_dense = true;
            if (dense->in_dim() != width) {
                throw Error(ErrorCode::DimensionMismatch,
                            "layer " + std::to_string(i) + " expects input width " +
                                std::to_string(dense->in_dim()) + ", got " + std::to_string(width));
            }
            if (dense->bias.size() != dense->out_dim()) {
                throw Error(ErrorCode::DimensionMismatch,
                            "layer " + std::to_string(i) + " bias length " +
                                std::to_string(dense->bias.size()) + " != output width " +
                                std::to_string(dense->out_dim()));
            }
            if (!dense->weights.allFinite() || !dense->bias.allFinite()) {
                throw Error(ErrorCode::NonFiniteWeight, "layer " + std::to_string(i));
            }
            width = dense->out_dim();
        }
        if (!has_dense) throw Error(ErrorCode::DimensionMismatch, "network has no dense layer");
        if (width != 1) {
            throw Error(ErrorCode::DimensionMismatch,
                        "final output width is " + std::to_string(width) + ", expected 1");
        }
    }

    int input_dim_;
    std::vector<Layer> layers_;
    OutputSemantics semantics_;
    std::string name_;
    std::vector<Matrix> abs_weights_;
};

namespace detail {

// Forward pass over `count` points stored dimension-major: component k of
// point p lives at values[k * count + p]. The per-point operation order is
// independent of `count`, which keeps batched and scalar results identical.
inline void forward_dimension_major(const NetworkSpec& net, std::vector<double>& values,
                                    std::vector<double>& scratch, std::size_t count) {
    std::size_t width = static_cast<std::size_t>(net.input_dim());
    for (const auto& layer : net.layers()) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            const std::size_t out = static_cast<std::size_t>(dense->out_dim());
            scratch.resize(out * count);
            for (std::size_t i = 0; i < out; ++i) {
                double* dst = scratch.data() + i * count;
                const double b = dense->bias[static_cast<Eigen::Index>(i)];
                for (std::size_t p = 0; p < count; ++p) dst[p] = b;
                for (std::size_t j = 0; j < width; ++j) {
                    const double w = dense->weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    const double* src = values.data() + j * count;
                    for (std::size_t p = 0; p < count; ++p) dst[p] += w * src[p];
                }
            }
            values.swap(scratch);
            width = out;
        } else {
            const auto kind = std::get<ActivationKind>(layer);
            const std::size_t n = width * count;
            switch (kind) {
                case ActivationKind::ReLU:
                    for (std::size_t k = 0; k < n; ++k) values[k] = values[k] > 0.0 ? values[k] : 0.0;
                    break;
                case ActivationKind::Identity:
                    break;
                default:
                    for (std::size_t k = 0; k < n; ++k) values[k] = activate(kind, values[k]);
                    break;
            }
        }
    }
}

} // namespace detail

/// Exact forward pass at one point.
inline double eval_scalar(const NetworkSpec& net, Eigen::Ref<const Vector> x) {
    if (x.size() != net.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "point has dimension " + std::to_string(x.size()) +
                                                      ", network expects " + std::to_string(net.input_dim()));
    }
    thread_local std::vector<double> values;
    thread_local std::vector<double> scratch;
    values.assign(x.data(), x.data() + x.size());
    detail::forward_dimension_major(net, values, scratch, 1);
    return values[0];
}

/// Evaluates every column of `points` (input_dim x n). Bit-identical to
/// calling eval_scalar on each column.
inline Vector eval_batch(const NetworkSpec& net, const Matrix& points) {
    if (points.cols() == 0) return Vector(0);
    if (points.rows() != net.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "points have dimension " + std::to_string(points.rows()) +
                                                      ", network expects " + std::to_string(net.input_dim()));
    }
    constexpr std::size_t chunk = 256;
    const std::size_t n = static_cast<std::size_t>(points.cols());
    const std::size_t d = static_cast<std::size_t>(points.rows());
    Vector out(points.cols());
    std::vector<double> values;
    std::vector<double> scratch;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t count = std::min(chunk, n - start);
        values.resize(d * count);
        for (std::size_t k = 0; k < d; ++k) {
            for (std::size_t p = 0; p < count; ++p) {
                values[k * count + p] = points(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(start + p));
            }
        }
        detail::forward_dimension_major(net, values, scratch, count);
        for (std::size_t p = 0; p < count; ++p) out[static_cast<Eigen::Index>(start + p)] = values[p];
    }
    return out;
}

/// Exact ReLU network for the L-infinity box field max_i |x_i - c_i| - h,
/// built from |a| = relu(a) + relu(-a) and max(a, b) = b + relu(a - b).
inline NetworkSpec build_box_oracle(const Vector& center, double halfwidth) {
    if (!(halfwidth > 0.0) || !std::isfinite(halfwidth)) {
        throw Error(ErrorCode::InvalidParameter, "box halfwidth must be positive");
    }
    const Eigen::Index d = center.size();
    if (d < 1) throw Error(ErrorCode::InvalidParameter, "box center must have positive dimension");

    std::vector<Layer> layers;

    // relu(x_i - c_i), relu(c_i - x_i)
    DenseLayer split{Matrix::Zero(2 * d, d), Vector::Zero(2 * d)};
    for (Eigen::Index i = 0; i < d; ++i) {
        split.weights(2 * i, i) = 1.0;
        split.bias[2 * i] = -center[i];
        split.weights(2 * i + 1, i) = -1.0;
        split.bias[2 * i + 1] = center[i];
    }
    layers.emplace_back(std::move(split));
    layers.emplace_back(ActivationKind::ReLU);

    if (d == 1) {
        DenseLayer out{Matrix::Ones(1, 2), Vector::Constant(1, -halfwidth)};
        layers.emplace_back(std::move(out));
        return NetworkSpec(1, std::move(layers), OutputSemantics::SDF, "box_oracle");
    }

    // [a0 - a1, a1, ..., a_{d-1}] with a_i = |x_i - c_i|
    DenseLayer gather{Matrix::Zero(d, 2 * d), Vector::Zero(d)};
    gather.weights(0, 0) = 1.0;
    gather.weights(0, 1) = 1.0;
    gather.weights(0, 2) = -1.0;
    gather.weights(0, 3) = -1.0;
    for (Eigen::Index i = 1; i < d; ++i) {
        gather.weights(i, 2 * i) = 1.0;
        gather.weights(i, 2 * i + 1) = 1.0;
    }
    layers.emplace_back(std::move(gather));
    layers.emplace_back(ActivationKind::ReLU);

    // Input at stage k: [relu(m - a_k), a_k, ..., a_{d-1}], where m is the
    // running max of a_0..a_{k-1}. The next running max is relu(.) + a_k.
    for (Eigen::Index k = 1; k < d - 1; ++k) {
        const Eigen::Index in = d - k + 1;
        const Eigen::Index out = d - k;
        DenseLayer step{Matrix::Zero(out, in), Vector::Zero(out)};
        step.weights(0, 0) = 1.0;
        step.weights(0, 1) = 1.0;
        step.weights(0, 2) = -1.0;
        for (Eigen::Index i = 1; i < out; ++i) step.weights(i, i + 1) = 1.0;
        layers.emplace_back(std::move(step));
        layers.emplace_back(ActivationKind::ReLU);
    }

    DenseLayer out{Matrix::Ones(1, 2), Vector::Constant(1, -halfwidth)};
    layers.emplace_back(std::move(out));
    return NetworkSpec(static_cast<int>(d), std::move(layers), OutputSemantics::SDF, "box_oracle");
}

template <typename Derived>
NetworkSpec build_box_oracle(const Eigen::MatrixBase<Derived>& center, double halfwidth) {
    return build_box_oracle(Vector(center), halfwidth);
}

// ---------------------------------------------------------------------------
// Weight file I/O

namespace detail {

// JSON has no NaN/Infinity literals, but common writers emit them anyway.
// Map bare tokens outside strings to null so they surface as NonFiniteWeight.
inline std::string replace_nonfinite_tokens(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            out.push_back(c);
            if (c == '\\' && i + 1 < text.size()) {
                out.push_back(text[++i]);
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        auto starts = [&](std::string_view tok) { return text.substr(i, tok.size()) == tok; };
        if (starts("-Infinity")) {
            out += "null";
            i += 8;
        } else if (starts("Infinity")) {
            out += "null";
            i += 7;
        } else if (starts("NaN")) {
            out += "null";
            i += 2;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

inline double json_weight(const nlohmann::json& v) {
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!v.is_number()) throw Error(ErrorCode::ParseError, "weight entry is not a number");
    return v.get<double>();
}

inline ActivationKind parse_activation(const std::string& kind) {
    if (kind == "relu") return ActivationKind::ReLU;
    if (kind == "elu") return ActivationKind::ELU;
    if (kind == "sin") return ActivationKind::Sin;
    if (kind == "tanh") return ActivationKind::Tanh;
    if (kind == "identity") return ActivationKind::Identity;
    throw Error(ErrorCode::ParseError, "unknown activation kind '" + kind + "'");
}

} // namespace detail

inline NetworkSpec parse_network(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(detail::replace_nonfinite_tokens(text));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    try {
        if (!doc.is_object()) throw Error(ErrorCode::ParseError, "top level must be an object");
        const int input_dim = doc.at("input_dim").get<int>();
        OutputSemantics semantics = OutputSemantics::SDF;
        if (doc.contains("output_semantics")) {
            const auto s = doc.at("output_semantics").get<std::string>();
            if (s == "sdf") {
                semantics = OutputSemantics::SDF;
            } else if (s == "occupancy_logit") {
                semantics = OutputSemantics::OccupancyLogit;
            } else {
                throw Error(ErrorCode::ParseError, "unknown output_semantics '" + s + "'");
            }
        }
        std::string name = doc.value("name", std::string{});

        std::vector<Layer> layers;
        for (const auto& entry : doc.at("layers")) {
            const auto type = entry.at("type").get<std::string>();
            if (type == "dense") {
                const auto& w = entry.at("weights");
                const auto& b = entry.at("bias");
                if (!w.is_array() || !b.is_array()) throw Error(ErrorCode::ParseError, "dense layer arrays");
                const auto rows = static_cast<Eigen::Index>(w.size());
                const auto cols = rows > 0 ? static_cast<Eigen::Index>(w[0].size()) : 0;
                DenseLayer dense{Matrix(rows, cols), Vector(static_cast<Eigen::Index>(b.size()))};
                for (Eigen::Index i = 0; i < rows; ++i) {
                    const auto& row = w[static_cast<std::size_t>(i)];
                    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
                        throw Error(ErrorCode::DimensionMismatch, "ragged weight matrix");
                    }
                    for (Eigen::Index j = 0; j < cols; ++j) {
                        dense.weights(i, j) = detail::json_weight(row[static_cast<std::size_t>(j)]);
                    }
                }
                for (Eigen::Index i = 0; i < dense.bias.size(); ++i) {
                    dense.bias[i] = detail::json_weight(b[static_cast<std::size_t>(i)]);
                }
                layers.emplace_back(std::move(dense));
            } else if (type == "activation") {
                layers.emplace_back(detail::parse_activation(entry.at("kind").get<std::string>()));
            } else {
                throw Error(ErrorCode::ParseError, "unknown layer type '" + type + "'");
            }
        }
        return NetworkSpec(input_dim, std::move(layers), semantics, std::move(name));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

inline NetworkSpec load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open weight file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_network(buffer.str());
}

inline nlohmann::json network_to_json(const NetworkSpec& net) {
    nlohmann::json doc;
    doc["input_dim"] = net.input_dim();
    doc["output_semantics"] = std::string(to_string(net.output_semantics()));
    doc["name"] = net.name();
    auto layers = nlohmann::json::array();
    for (const auto& layer : net.layers()) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            auto w = nlohmann::json::array();
            for (Eigen::Index i = 0; i < dense->out_dim(); ++i) {
                auto row = nlohmann::json::array();
                for (Eigen::Index j = 0; j < dense->in_dim(); ++j) row.push_back(dense->weights(i, j));
                w.push_back(std::move(row));
            }
            auto b = nlohmann::json::array();
            for (Eigen::Index i = 0; i < dense->bias.size(); ++i) b.push_back(dense->bias[i]);
            layers.push_back({{"type", "dense"}, {"weights", std::move(w)}, {"bias", std::move(b)}});
        } else {
            layers.push_back({{"type", "activation"},
                              {"kind", std::string(to_string(std::get<ActivationKind>(layer)))}});
        }
    }
    doc["layers"] = std::move(layers);
    return doc;
}

inline void save_network(const NetworkSpec& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IOError, "cannot write '" + path + "'");
    out << network_to_json(net).dump() << '\n';
}

} // namespace spelunk

#endif
