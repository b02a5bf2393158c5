#include "dimignn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace dimignn {

std::string shape_to_string(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

namespace {

using Node = detail::TensorNode;
using NodePtr = std::shared_ptr<Node>;

void validate_shape(const Shape& s) {
    if (s.empty()) throw ShapeError("tensor shape must have at least one extent");
    for (int e : s) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(s));
    }
}

std::vector<std::int64_t> row_major_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size());
    std::int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("op '") + op + "' produced a non-finite value");
        }
    }
}

bool tracking(std::initializer_list<const Tensor*> ins) {
    if (Tape::active() == nullptr) return false;
    for (const Tensor* t : ins) {
        if (t->requires_grad()) return true;
    }
    return false;
}

std::vector<double>& grad_buf(const NodePtr& n) {
    if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
    return n->grad;
}

// Grad of `out`, or null when this branch of the graph never fed the loss.
const std::vector<double>* out_grad(const NodePtr& n) {
    return n->grad.empty() ? nullptr : &n->grad;
}

Tensor make_output(const char* op, Shape shape, std::vector<double> values, bool track) {
    check_finite(op, values);
    return Tensor(std::move(shape), std::move(values), track);
}

// --- broadcasting -----------------------------------------------------------

struct BcastPlan {
    Shape out;
    std::vector<std::int64_t> stride_a, stride_b;  // per out axis; 0 where broadcast
};

BcastPlan make_bcast(const char* op, const Shape& a, const Shape& b) {
    const int ra = static_cast<int>(a.size());
    const int rb = static_cast<int>(b.size());
    const int ro = std::max(ra, rb);
    const auto sa = row_major_strides(a);
    const auto sb = row_major_strides(b);

    BcastPlan p;
    p.out.resize(ro);
    p.stride_a.resize(ro);
    p.stride_b.resize(ro);
    for (int i = 0; i < ro; ++i) {
        const int da = ra - ro + i;
        const int db = rb - ro + i;
        const int ea = da >= 0 ? a[da] : 1;
        const int eb = db >= 0 ? b[db] : 1;
        if (ea != eb && ea != 1 && eb != 1) {
            throw ShapeError(std::string("op '") + op + "': shapes " + shape_to_string(a) +
                             " and " + shape_to_string(b) + " do not broadcast");
        }
        p.out[i] = std::max(ea, eb);
        p.stride_a[i] = (da >= 0 && ea == p.out[i]) ? sa[da] : 0;
        p.stride_b[i] = (db >= 0 && eb == p.out[i]) ? sb[db] : 0;
    }
    return p;
}

// Walks the broadcast output space, handing (out_index, a_index, b_index)
// to f for every element.
template <class F>
void bcast_for_each(const BcastPlan& p, F&& f) {
    const int ro = static_cast<int>(p.out.size());
    const std::int64_t n = shape_numel(p.out);
    std::vector<int> idx(ro, 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t io = 0; io < n; ++io) {
        f(io, ia, ib);
        for (int d = ro - 1; d >= 0; --d) {
            ++idx[d];
            ia += p.stride_a[d];
            ib += p.stride_b[d];
            if (idx[d] < p.out[d]) break;
            idx[d] = 0;
            ia -= p.stride_a[d] * p.out[d];
            ib -= p.stride_b[d] * p.out[d];
        }
    }
}

enum class BinOp { Add, Sub, Mul };

Tensor binary_elementwise(const char* name, BinOp kind, const Tensor& a, const Tensor& b) {
    const bool track = tracking({&a, &b});
    const NodePtr na = a.node();
    const NodePtr nb = b.node();

    if (na->shape == nb->shape) {
        // Fast path: no broadcasting bookkeeping.
        const std::size_t n = na->value.size();
        std::vector<double> out(n);
        const double* pa = na->value.data();
        const double* pb = nb->value.data();
        switch (kind) {
        case BinOp::Add: for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i]; break;
        case BinOp::Sub: for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] - pb[i]; break;
        case BinOp::Mul: for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i]; break;
        }
        Tensor result = make_output(name, na->shape, std::move(out), track);
        if (track) {
            NodePtr no = result.node();
            Tape::active()->record([kind, na, nb, no] {
                const auto* g = out_grad(no);
                if (!g) return;
                const std::size_t n = g->size();
                if (na->requires_grad) {
                    auto& ga = grad_buf(na);
                    if (kind == BinOp::Mul) {
                        for (std::size_t i = 0; i < n; ++i) ga[i] += (*g)[i] * nb->value[i];
                    } else {
                        for (std::size_t i = 0; i < n; ++i) ga[i] += (*g)[i];
                    }
                }
                if (nb->requires_grad) {
                    auto& gb = grad_buf(nb);
                    switch (kind) {
                    case BinOp::Add: for (std::size_t i = 0; i < n; ++i) gb[i] += (*g)[i]; break;
                    case BinOp::Sub: for (std::size_t i = 0; i < n; ++i) gb[i] -= (*g)[i]; break;
                    case BinOp::Mul: for (std::size_t i = 0; i < n; ++i) gb[i] += (*g)[i] * na->value[i]; break;
                    }
                }
            });
        }
        return result;
    }

    const BcastPlan plan = make_bcast(name, na->shape, nb->shape);
    std::vector<double> out(shape_numel(plan.out));
    const double* pa = na->value.data();
    const double* pb = nb->value.data();
    double* po = out.data();
    switch (kind) {
    case BinOp::Add:
        bcast_for_each(plan, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) { po[io] = pa[ia] + pb[ib]; });
        break;
    case BinOp::Sub:
        bcast_for_each(plan, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) { po[io] = pa[ia] - pb[ib]; });
        break;
    case BinOp::Mul:
        bcast_for_each(plan, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) { po[io] = pa[ia] * pb[ib]; });
        break;
    }
    Tensor result = make_output(name, plan.out, std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([kind, plan, na, nb, no] {
            const auto* g = out_grad(no);
            if (!g) return;
            const double* pg = g->data();
            if (na->requires_grad) {
                auto& ga = grad_buf(na);
                if (kind == BinOp::Mul) {
                    const double* pb = nb->value.data();
                    bcast_for_each(plan, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) { ga[ia] += pg[io] * pb[ib]; });
                } else {
                    bcast_for_each(plan, [&](std::int64_t io, std::int64_t ia, std::int64_t) { ga[ia] += pg[io]; });
                }
            }
            if (nb->requires_grad) {
                auto& gb = grad_buf(nb);
                switch (kind) {
                case BinOp::Add:
                    bcast_for_each(plan, [&](std::int64_t io, std::int64_t, std::int64_t ib) { gb[ib] += pg[io]; });
                    break;
                case BinOp::Sub:
                    bcast_for_each(plan, [&](std::int64_t io, std::int64_t, std::int64_t ib) { gb[ib] -= pg[io]; });
                    break;
                case BinOp::Mul: {
                    const double* pa = na->value.data();
                    bcast_for_each(plan, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) { gb[ib] += pg[io] * pa[ia]; });
                    break;
                }
                }
            }
        });
    }
    return result;
}

// --- unary elementwise ------------------------------------------------------

template <class Fwd, class Bwd>
Tensor unary_elementwise(const char* name, const Tensor& x, Fwd fwd, Bwd bwd_factor_from) {
    // bwd_factor_from(x_i, y_i) returns dy/dx at element i.
    const bool track = tracking({&x});
    const NodePtr nx = x.node();
    const std::size_t n = nx->value.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(nx->value[i]);
    Tensor result = make_output(name, nx->shape, std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([nx, no, bwd_factor_from] {
            const auto* g = out_grad(no);
            if (!g || !nx->requires_grad) return;
            auto& gx = grad_buf(nx);
            for (std::size_t i = 0; i < g->size(); ++i) {
                gx[i] += (*g)[i] * bwd_factor_from(nx->value[i], no->value[i]);
            }
        });
    }
    return result;
}

// --- raw matrix kernels -----------------------------------------------------

void mm(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        std::fill(crow, crow + n, 0.0);
        const double* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// dA += dC . B^T
void mm_grad_a(const double* dc, const double* b, double* da, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* dcrow = dc + i * n;
        double* darow = da + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const double* brow = b + p * n;
            double acc = 0.0;
            for (std::int64_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
            darow[p] += acc;
        }
    }
}

// dB += A^T . dC
void mm_grad_b(const double* a, const double* dc, double* db, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* dcrow = dc + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* dbrow = db + p * n;
            for (std::int64_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
        }
    }
}

} // namespace

// --- Tensor -----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    validate_shape(shape);
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_to_string(shape));
    }
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

double Tensor::at(const std::vector<int>& index) const {
    if (static_cast<int>(index.size()) != rank()) {
        throw ShapeError("index rank mismatch for shape " + shape_to_string(shape()));
    }
    const auto strides = row_major_strides(node_->shape);
    std::int64_t flat = 0;
    for (std::size_t d = 0; d < index.size(); ++d) {
        if (index[d] < 0 || index[d] >= node_->shape[d]) {
            throw ShapeError("index out of range for shape " + shape_to_string(shape()));
        }
        flat += index[d] * strides[d];
    }
    return node_->value[static_cast<std::size_t>(flat)];
}

double Tensor::scalar_value() const {
    if (numel() != 1) throw ShapeError("scalar_value on tensor of shape " + shape_to_string(shape()));
    return node_->value[0];
}

Tensor Tensor::detached() const {
    return Tensor(node_->shape, node_->value, false);
}

// --- Tape -------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() {
    g_active_tape = prev_;
}

Tape* Tape::active() noexcept {
    return g_active_tape;
}

void Tape::record(std::function<void()> backward_step) {
    entries_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
    if (entries_.empty()) {
        throw NumericError("backward called on an empty tape (no forward pass recorded)");
    }
    if (loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_to_string(loss.shape()));
    }
    loss.node()->grad.assign(1, 1.0);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    entries_.clear();
}

// --- ops --------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise("add", BinOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise("sub", BinOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise("mul", BinOp::Mul, a, b); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    const NodePtr na = a.node();
    const NodePtr nb = b.node();
    const int ra = a.rank();
    const int rb = b.rank();
    if (ra < 2 && rb < 2) {
        throw ShapeError("op 'matmul': operands must be at least rank 2, got " +
                         shape_to_string(na->shape) + " x " + shape_to_string(nb->shape));
    }

    bool batched = false;
    std::int64_t batch = 1, m = 0, k = 0, n = 0;
    Shape out_shape;
    if (ra == rb && ra >= 2) {
        // Same rank: plain (rank 2) or batched with equal batch extents.
        for (int i = 0; i + 2 < ra; ++i) {
            if (na->shape[i] != nb->shape[i]) {
                throw ShapeError("op 'matmul': batch extents differ, " + shape_to_string(na->shape) +
                                 " x " + shape_to_string(nb->shape));
            }
            batch *= na->shape[i];
        }
        m = na->shape[ra - 2];
        k = na->shape[ra - 1];
        n = nb->shape[rb - 1];
        if (nb->shape[rb - 2] != k) {
            throw ShapeError("op 'matmul': inner extents differ, " + shape_to_string(na->shape) +
                             " x " + shape_to_string(nb->shape));
        }
        batched = true;
        out_shape.assign(na->shape.begin(), na->shape.end() - 1);
        out_shape.push_back(static_cast<int>(n));
    } else if (rb == 2 && ra >= 2) {
        // Linear map over the last axis of a.
        k = na->shape[ra - 1];
        n = nb->shape[1];
        if (nb->shape[0] != k) {
            throw ShapeError("op 'matmul': inner extents differ, " + shape_to_string(na->shape) +
                             " x " + shape_to_string(nb->shape));
        }
        m = shape_numel(na->shape) / k;
        out_shape.assign(na->shape.begin(), na->shape.end() - 1);
        out_shape.push_back(static_cast<int>(n));
    } else {
        throw ShapeError("op 'matmul': unsupported operand ranks, " + shape_to_string(na->shape) +
                         " x " + shape_to_string(nb->shape));
    }

    const bool track = tracking({&a, &b});
    std::vector<double> out(static_cast<std::size_t>(batched ? batch * m * n : m * n));
    if (batched) {
        for (std::int64_t bi = 0; bi < batch; ++bi) {
            mm(na->value.data() + bi * m * k, nb->value.data() + bi * k * n,
               out.data() + bi * m * n, m, k, n);
        }
    } else {
        mm(na->value.data(), nb->value.data(), out.data(), m, k, n);
    }
    Tensor result = make_output("matmul", std::move(out_shape), std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([na, nb, no, batched, batch, m, k, n] {
            const auto* g = out_grad(no);
            if (!g) return;
            if (batched) {
                for (std::int64_t bi = 0; bi < batch; ++bi) {
                    const double* dc = g->data() + bi * m * n;
                    if (na->requires_grad) {
                        mm_grad_a(dc, nb->value.data() + bi * k * n, grad_buf(na).data() + bi * m * k, m, k, n);
                    }
                    if (nb->requires_grad) {
                        mm_grad_b(na->value.data() + bi * m * k, dc, grad_buf(nb).data() + bi * k * n, m, k, n);
                    }
                }
            } else {
                if (na->requires_grad) mm_grad_a(g->data(), nb->value.data(), grad_buf(na).data(), m, k, n);
                if (nb->requires_grad) mm_grad_b(na->value.data(), g->data(), grad_buf(nb).data(), m, k, n);
            }
        });
    }
    return result;
}

Tensor tanh(const Tensor& x) {
    return unary_elementwise("tanh", x,
                             [](double v) { return std::tanh(v); },
                             [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
    return unary_elementwise("relu", x,
                             [](double v) { return v > 0.0 ? v : 0.0; },
                             [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
    return unary_elementwise("leaky_relu", x,
                             [negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; },
                             [negative_slope](double v, double) { return v > 0.0 ? 1.0 : negative_slope; });
}

Tensor exp(const Tensor& x) {
    return unary_elementwise("exp", x,
                             [](double v) { return std::exp(v); },
                             [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    for (double v : x.values()) {
        if (v <= 0.0) throw NumericError("op 'log' requires strictly positive inputs");
    }
    return unary_elementwise("log", x,
                             [](double v) { return std::log(v); },
                             [](double v, double) { return 1.0 / v; });
}

Tensor softmax_lastdim(const Tensor& x) {
    const NodePtr nx = x.node();
    const std::int64_t last = nx->shape.back();
    const std::int64_t rows = shape_numel(nx->shape) / last;
    const bool track = tracking({&x});
    std::vector<double> out(nx->value.size());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = nx->value.data() + r * last;
        double* o = out.data() + r * last;
        double mx = in[0];
        for (std::int64_t j = 1; j < last; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::int64_t j = 0; j < last; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        const double inv = 1.0 / sum;
        for (std::int64_t j = 0; j < last; ++j) o[j] *= inv;
    }
    Tensor result = make_output("softmax_lastdim", nx->shape, std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([nx, no, rows, last] {
            const auto* g = out_grad(no);
            if (!g || !nx->requires_grad) return;
            auto& gx = grad_buf(nx);
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* y = no->value.data() + r * last;
                const double* dy = g->data() + r * last;
                double dot = 0.0;
                for (std::int64_t j = 0; j < last; ++j) dot += dy[j] * y[j];
                double* gxr = gx.data() + r * last;
                for (std::int64_t j = 0; j < last; ++j) gxr[j] += y[j] * (dy[j] - dot);
            }
        });
    }
    return result;
}

Tensor mean_axis(const Tensor& x, int axis, bool keepdim) {
    const NodePtr nx = x.node();
    const int r = x.rank();
    if (axis < 0 || axis >= r) {
        throw ShapeError("op 'mean_axis': axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(nx->shape));
    }
    std::int64_t pre = 1, post = 1;
    for (int i = 0; i < axis; ++i) pre *= nx->shape[i];
    for (int i = axis + 1; i < r; ++i) post *= nx->shape[i];
    const std::int64_t len = nx->shape[axis];

    Shape out_shape;
    if (keepdim) {
        out_shape = nx->shape;
        out_shape[axis] = 1;
    } else if (r == 1) {
        out_shape = {1};
    } else {
        out_shape.reserve(r - 1);
        for (int i = 0; i < r; ++i) {
            if (i != axis) out_shape.push_back(nx->shape[i]);
        }
    }

    const bool track = tracking({&x});
    std::vector<double> out(static_cast<std::size_t>(pre * post), 0.0);
    const double inv = 1.0 / static_cast<double>(len);
    for (std::int64_t p = 0; p < pre; ++p) {
        for (std::int64_t l = 0; l < len; ++l) {
            const double* src = nx->value.data() + (p * len + l) * post;
            double* dst = out.data() + p * post;
            for (std::int64_t q = 0; q < post; ++q) dst[q] += src[q];
        }
    }
    for (double& v : out) v *= inv;
    Tensor result = make_output("mean_axis", std::move(out_shape), std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([nx, no, pre, post, len, inv] {
            const auto* g = out_grad(no);
            if (!g || !nx->requires_grad) return;
            auto& gx = grad_buf(nx);
            for (std::int64_t p = 0; p < pre; ++p) {
                const double* gsrc = g->data() + p * post;
                for (std::int64_t l = 0; l < len; ++l) {
                    double* gdst = gx.data() + (p * len + l) * post;
                    for (std::int64_t q = 0; q < post; ++q) gdst[q] += gsrc[q] * inv;
                }
            }
        });
    }
    return result;
}

namespace {
Tensor reduce_all(const char* name, const Tensor& x, bool mean) {
    const NodePtr nx = x.node();
    const std::size_t n = nx->value.size();
    double acc = 0.0;
    for (double v : nx->value) acc += v;
    const double factor = mean ? 1.0 / static_cast<double>(n) : 1.0;
    const bool track = tracking({&x});
    Tensor result = make_output(name, Shape{1}, {acc * factor}, track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([nx, no, factor] {
            const auto* g = out_grad(no);
            if (!g || !nx->requires_grad) return;
            auto& gx = grad_buf(nx);
            const double gv = (*g)[0] * factor;
            for (double& v : gx) v += gv;
        });
    }
    return result;
}
} // namespace

Tensor sum_all(const Tensor& x) { return reduce_all("sum_all", x, false); }
Tensor mean_all(const Tensor& x) { return reduce_all("mean_all", x, true); }

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("op 'concat': needs at least one input");
    const int r = parts[0].rank();
    if (axis < 0 || axis >= r) {
        throw ShapeError("op 'concat': axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(parts[0].shape()));
    }
    Shape out_shape = parts[0].shape();
    int total_axis = 0;
    for (const Tensor& t : parts) {
        if (t.rank() != r) throw ShapeError("op 'concat': rank mismatch between inputs");
        for (int d = 0; d < r; ++d) {
            if (d != axis && t.shape()[d] != out_shape[d]) {
                throw ShapeError("op 'concat': extents differ off the concat axis, " +
                                 shape_to_string(t.shape()) + " vs " + shape_to_string(out_shape));
            }
        }
        total_axis += t.shape()[axis];
    }
    out_shape[axis] = total_axis;

    std::int64_t pre = 1, post = 1;
    for (int i = 0; i < axis; ++i) pre *= out_shape[i];
    for (int i = axis + 1; i < r; ++i) post *= out_shape[i];

    bool track = false;
    for (const Tensor& t : parts) track = track || tracking({&t});

    std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
    const std::int64_t out_row = static_cast<std::int64_t>(total_axis) * post;
    std::int64_t offset = 0;
    std::vector<NodePtr> nodes;
    nodes.reserve(parts.size());
    std::vector<std::int64_t> offsets;
    std::vector<std::int64_t> lens;
    for (const Tensor& t : parts) {
        const std::int64_t len = static_cast<std::int64_t>(t.shape()[axis]) * post;
        for (std::int64_t p = 0; p < pre; ++p) {
            std::memcpy(out.data() + p * out_row + offset,
                        t.values().data() + p * len,
                        static_cast<std::size_t>(len) * sizeof(double));
        }
        nodes.push_back(t.node());
        offsets.push_back(offset);
        lens.push_back(len);
        offset += len;
    }
    Tensor result = make_output("concat", std::move(out_shape), std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([nodes, offsets, lens, no, pre, out_row] {
            const auto* g = out_grad(no);
            if (!g) return;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                if (!nodes[i]->requires_grad) continue;
                auto& gx = grad_buf(nodes[i]);
                for (std::int64_t p = 0; p < pre; ++p) {
                    const double* src = g->data() + p * out_row + offsets[i];
                    double* dst = gx.data() + p * lens[i];
                    for (std::int64_t q = 0; q < lens[i]; ++q) dst[q] += src[q];
                }
            }
        });
    }
    return result;
}

Tensor slice(const Tensor& x, int axis, int start, int length) {
    const NodePtr nx = x.node();
    const int r = x.rank();
    if (axis < 0 || axis >= r) {
        throw ShapeError("op 'slice': axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(nx->shape));
    }
    if (length <= 0 || start < 0 || start + length > nx->shape[axis]) {
        throw ShapeError("op 'slice': range [" + std::to_string(start) + "," +
                         std::to_string(start + length) + ") invalid for extent " +
                         std::to_string(nx->shape[axis]));
    }
    std::int64_t pre = 1, post = 1;
    for (int i = 0; i < axis; ++i) pre *= nx->shape[i];
    for (int i = axis + 1; i < r; ++i) post *= nx->shape[i];
    const std::int64_t in_row = static_cast<std::int64_t>(nx->shape[axis]) * post;
    const std::int64_t out_row = static_cast<std::int64_t>(length) * post;
    const std::int64_t skip = static_cast<std::int64_t>(start) * post;

    Shape out_shape = nx->shape;
    out_shape[axis] = length;
    const bool track = tracking({&x});
    std::vector<double> out(static_cast<std::size_t>(pre * out_row));
    for (std::int64_t p = 0; p < pre; ++p) {
        std::memcpy(out.data() + p * out_row, nx->value.data() + p * in_row + skip,
                    static_cast<std::size_t>(out_row) * sizeof(double));
    }
    Tensor result = make_output("slice", std::move(out_shape), std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([nx, no, pre, in_row, out_row, skip] {
            const auto* g = out_grad(no);
            if (!g || !nx->requires_grad) return;
            auto& gx = grad_buf(nx);
            for (std::int64_t p = 0; p < pre; ++p) {
                const double* src = g->data() + p * out_row;
                double* dst = gx.data() + p * in_row + skip;
                for (std::int64_t q = 0; q < out_row; ++q) dst[q] += src[q];
            }
        });
    }
    return result;
}

Tensor transpose(const Tensor& x, const std::vector<int>& perm) {
    const NodePtr nx = x.node();
    const int r = x.rank();
    if (static_cast<int>(perm.size()) != r) {
        throw ShapeError("op 'transpose': perm rank mismatch for shape " + shape_to_string(nx->shape));
    }
    std::vector<bool> seen(r, false);
    for (int p : perm) {
        if (p < 0 || p >= r || seen[p]) throw ShapeError("op 'transpose': perm is not a permutation");
        seen[p] = true;
    }
    const auto in_strides = row_major_strides(nx->shape);
    Shape out_shape(r);
    std::vector<std::int64_t> step(r);
    for (int d = 0; d < r; ++d) {
        out_shape[d] = nx->shape[perm[d]];
        step[d] = in_strides[perm[d]];
    }
    const std::int64_t n = shape_numel(out_shape);
    const bool track = tracking({&x});
    std::vector<double> out(static_cast<std::size_t>(n));
    {
        std::vector<int> idx(r, 0);
        std::int64_t ii = 0;
        for (std::int64_t io = 0; io < n; ++io) {
            out[io] = nx->value[ii];
            for (int d = r - 1; d >= 0; --d) {
                ++idx[d];
                ii += step[d];
                if (idx[d] < out_shape[d]) break;
                idx[d] = 0;
                ii -= step[d] * out_shape[d];
            }
        }
    }
    Tensor result = make_output("transpose", out_shape, std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([nx, no, out_shape, step, r, n] {
            const auto* g = out_grad(no);
            if (!g || !nx->requires_grad) return;
            auto& gx = grad_buf(nx);
            std::vector<int> idx(r, 0);
            std::int64_t ii = 0;
            for (std::int64_t io = 0; io < n; ++io) {
                gx[ii] += (*g)[io];
                for (int d = r - 1; d >= 0; --d) {
                    ++idx[d];
                    ii += step[d];
                    if (idx[d] < out_shape[d]) break;
                    idx[d] = 0;
                    ii -= step[d] * out_shape[d];
                }
            }
        });
    }
    return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
    validate_shape(shape);
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("op 'reshape': cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
    }
    const NodePtr nx = x.node();
    const bool track = tracking({&x});
    Tensor result = make_output("reshape", std::move(shape), nx->value, track);
    if (track) {
        NodePtr no = result.node();
        Tape::active()->record([nx, no] {
            const auto* g = out_grad(no);
            if (!g || !nx->requires_grad) return;
            auto& gx = grad_buf(nx);
            for (std::size_t i = 0; i < g->size(); ++i) gx[i] += (*g)[i];
        });
    }
    return result;
}

Tensor scale(const Tensor& x, double c) {
    return unary_elementwise("scale", x,
                             [c](double v) { return c * v; },
                             [c](double, double) { return c; });
}

Tensor take(const Tensor& x, int axis, const std::vector<int>& indices, const Shape& index_shape) {
    const NodePtr nx = x.node();
    const int r = x.rank();
    if (axis < 0 || axis >= r) {
        throw ShapeError("op 'take': axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(nx->shape));
    }
    if (shape_numel(index_shape) != static_cast<std::int64_t>(indices.size())) {
        throw ShapeError("op 'take': index count does not match index shape " + shape_to_string(index_shape));
    }
    const int extent = nx->shape[axis];
    for (int i : indices) {
        if (i < 0 || i >= extent) {
            throw ShapeError("op 'take': index " + std::to_string(i) + " out of range for extent " +
                             std::to_string(extent));
        }
    }
    std::int64_t pre = 1, post = 1;
    for (int i = 0; i < axis; ++i) pre *= nx->shape[i];
    for (int i = axis + 1; i < r; ++i) post *= nx->shape[i];
    const std::int64_t in_row = static_cast<std::int64_t>(extent) * post;
    const std::int64_t m = static_cast<std::int64_t>(indices.size());

    Shape out_shape;
    out_shape.reserve(r - 1 + index_shape.size());
    for (int i = 0; i < axis; ++i) out_shape.push_back(nx->shape[i]);
    for (int e : index_shape) out_shape.push_back(e);
    for (int i = axis + 1; i < r; ++i) out_shape.push_back(nx->shape[i]);

    const bool track = tracking({&x});
    std::vector<double> out(static_cast<std::size_t>(pre * m * post));
    for (std::int64_t p = 0; p < pre; ++p) {
        for (std::int64_t j = 0; j < m; ++j) {
            std::memcpy(out.data() + (p * m + j) * post,
                        nx->value.data() + p * in_row + static_cast<std::int64_t>(indices[j]) * post,
                        static_cast<std::size_t>(post) * sizeof(double));
        }
    }
    Tensor result = make_output("take", std::move(out_shape), std::move(out), track);
    if (track) {
        NodePtr no = result.node();
        std::vector<int> idx = indices;
        Tape::active()->record([nx, no, idx, pre, post, m, in_row] {
            const auto* g = out_grad(no);
            if (!g || !nx->requires_grad) return;
            auto& gx = grad_buf(nx);
            for (std::int64_t p = 0; p < pre; ++p) {
                for (std::int64_t j = 0; j < m; ++j) {
                    const double* src = g->data() + (p * m + j) * post;
                    double* dst = gx.data() + p * in_row + static_cast<std::int64_t>(idx[j]) * post;
                    for (std::int64_t q = 0; q < post; ++q) dst[q] += src[q];
                }
            }
        });
    }
    return result;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matmul(x, w), b);
}

// --- generic dispatch -------------------------------------------------------

const char* op_kind_name(OpKind k) {
    switch (k) {
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::MatMul: return "matmul";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::SoftmaxLastDim: return "softmax_lastdim";
    case OpKind::MeanAxis: return "mean_axis";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Transpose: return "transpose";
    case OpKind::LeakyRelu: return "leaky_relu";
    }
    return "?";
}

namespace {
void expect_arity(OpKind k, const std::vector<Tensor>& inputs, std::size_t n) {
    if (inputs.size() != n) {
        throw ShapeError(std::string("op '") + op_kind_name(k) + "' expects " + std::to_string(n) +
                         " input(s), got " + std::to_string(inputs.size()));
    }
}
} // namespace

Tensor forward_op(OpKind kind, const std::vector<Tensor>& inputs, const OpArgs& args) {
    switch (kind) {
    case OpKind::Add: expect_arity(kind, inputs, 2); return add(inputs[0], inputs[1]);
    case OpKind::Sub: expect_arity(kind, inputs, 2); return sub(inputs[0], inputs[1]);
    case OpKind::Mul: expect_arity(kind, inputs, 2); return mul(inputs[0], inputs[1]);
    case OpKind::MatMul: expect_arity(kind, inputs, 2); return matmul(inputs[0], inputs[1]);
    case OpKind::Tanh: expect_arity(kind, inputs, 1); return tanh(inputs[0]);
    case OpKind::Relu: expect_arity(kind, inputs, 1); return relu(inputs[0]);
    case OpKind::Exp: expect_arity(kind, inputs, 1); return exp(inputs[0]);
    case OpKind::Log: expect_arity(kind, inputs, 1); return log(inputs[0]);
    case OpKind::SoftmaxLastDim: expect_arity(kind, inputs, 1); return softmax_lastdim(inputs[0]);
    case OpKind::MeanAxis: expect_arity(kind, inputs, 1); return mean_axis(inputs[0], args.axis);
    case OpKind::Concat: return concat(inputs, args.axis);
    case OpKind::Slice: expect_arity(kind, inputs, 1); return slice(inputs[0], args.axis, args.start, args.length);
    case OpKind::Transpose: expect_arity(kind, inputs, 1); return transpose(inputs[0], args.perm);
    case OpKind::LeakyRelu: expect_arity(kind, inputs, 1); return leaky_relu(inputs[0], args.negative_slope);
    }
    throw ShapeError("unknown op kind");
}

} // namespace dimignn
