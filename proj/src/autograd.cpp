#include "resdual/autograd.hpp"

#include <utility>

namespace resdual::ad {

namespace {
// dst += src, shape-checked by the caller's construction
void add_into(Tensor& dst, const Tensor& src) {
    double* pd = dst.data();
    const double* ps = src.data();
    for (std::int64_t i = 0; i < dst.numel(); ++i) pd[i] += ps[i];
}
}  // namespace

const Tensor& Var::value() const {
    if (!tape_) throw contract_error("Var: reading an unbound variable");
    return tape_->val(id_);
}

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor(), false, {}, nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Tensor value, std::vector<int> parents,
                 std::function<void(Tape&, int)> backward) {
    nodes_.push_back(Node{std::move(value), Tensor(), false, std::move(parents),
                          std::move(backward)});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Tensor& Tape::val(int id) const { return nodes_.at(id).value; }

Tensor& Tape::grad_acc(int id) {
    Node& n = nodes_.at(id);
    if (!n.touched) {
        n.grad = Tensor(n.value.shape());
        n.touched = true;
    }
    return n.grad;
}

bool Tape::grad_touched(int id) const { return nodes_.at(id).touched; }

void Tape::backward(Var out) {
    if (out.tape() != this) throw contract_error("backward: output is not on this tape");
    if (val(out.id()).numel() != 1)
        throw contract_error("backward: output must be scalar, got shape " +
                             val(out.id()).shape().str());
    for (Node& n : nodes_) {
        n.grad = Tensor();
        n.touched = false;
    }
    grad_acc(out.id()).data()[0] = 1.0;
    // creation order is topological, so one reverse sweep visits every
    // reachable node exactly once, after all of its consumers
    for (int i = out.id(); i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.touched && n.backward) n.backward(*this, i);
    }
}

std::vector<Tensor> Tape::grad(Var out, const std::vector<Var>& inputs) {
    backward(out);
    std::vector<Tensor> gs;
    gs.reserve(inputs.size());
    for (const Var& v : inputs) {
        if (v.tape() != this) throw contract_error("grad: input is not on this tape");
        gs.push_back(grad_touched(v.id()) ? nodes_[v.id()].grad : Tensor(val(v.id()).shape()));
    }
    return gs;
}

namespace {
Tape* same_tape(const Var& a, const Var& b, const char* op) {
    if (!a.valid() || !b.valid() || a.tape() != b.tape())
        throw contract_error(std::string(op) + ": operands live on different tapes");
    return a.tape();
}
}  // namespace

Var matmul(const Var& a, const Var& b) {
    Tape* t = same_tape(a, b, "matmul");
    Tensor v = resdual::matmul(a.value(), b.value());
    const int ia = a.id(), ib = b.id();
    return t->record(std::move(v), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        add_into(tp.grad_acc(ia), resdual::matmul(g, resdual::transpose(tp.val(ib))));
        add_into(tp.grad_acc(ib), resdual::matmul(resdual::transpose(tp.val(ia)), g));
    });
}

Var transpose(const Var& a) {
    Tape* t = a.tape();
    Tensor v = resdual::transpose(a.value());
    const int ia = a.id();
    return t->record(std::move(v), {ia}, [ia](Tape& tp, int self) {
        add_into(tp.grad_acc(ia), resdual::transpose(tp.grad_acc(self)));
    });
}

Var add(const Var& a, const Var& b) {
    Tape* t = same_tape(a, b, "add");
    Tensor v = resdual::add(a.value(), b.value());
    const int ia = a.id(), ib = b.id();
    return t->record(std::move(v), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        add_into(tp.grad_acc(ia), g);
        add_into(tp.grad_acc(ib), g);
    });
}

Var sub(const Var& a, const Var& b) {
    Tape* t = same_tape(a, b, "sub");
    Tensor v = resdual::sub(a.value(), b.value());
    const int ia = a.id(), ib = b.id();
    return t->record(std::move(v), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        add_into(tp.grad_acc(ia), g);
        add_into(tp.grad_acc(ib), resdual::scale(g, -1.0));
    });
}

Var scale(const Var& a, double s) {
    Tape* t = a.tape();
    Tensor v = resdual::scale(a.value(), s);
    const int ia = a.id();
    return t->record(std::move(v), {ia}, [ia, s](Tape& tp, int self) {
        add_into(tp.grad_acc(ia), resdual::scale(tp.grad_acc(self), s));
    });
}

Var scale_by_scalar(const Var& t_in, const Var& s) {
    Tape* t = same_tape(t_in, s, "scale_by_scalar");
    Tensor v = resdual::scale_by_scalar(t_in.value(), s.value());
    const int it = t_in.id(), is = s.id();
    return t->record(std::move(v), {it, is}, [it, is](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        const Tensor& tv = tp.val(it);
        add_into(tp.grad_acc(it), resdual::scale(g, tp.val(is).data()[0]));
        double acc = 0.0;
        for (std::int64_t i = 0; i < g.numel(); ++i) acc += g.data()[i] * tv.data()[i];
        tp.grad_acc(is).data()[0] += acc;
    });
}

Var element(const Var& a, std::int64_t i, std::int64_t j) {
    Tape* t = a.tape();
    Tensor v = resdual::element(a.value(), i, j);
    const int ia = a.id();
    return t->record(std::move(v), {ia}, [ia, i, j](Tape& tp, int self) {
        tp.grad_acc(ia).at(i, j) += tp.grad_acc(self).data()[0];
    });
}

Var rows(const Var& a, std::int64_t i0, std::int64_t n) {
    Tape* t = a.tape();
    Tensor v = resdual::rows(a.value(), i0, n);
    const int ia = a.id();
    return t->record(std::move(v), {ia}, [ia, i0, n](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        Tensor& ga = tp.grad_acc(ia);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < g.cols(); ++j) ga.at(i0 + i, j) += g.at(i, j);
    });
}

Var row(const Var& a, std::int64_t i) { return rows(a, i, 1); }

Var vstack(const std::vector<Var>& parts) {
    if (parts.empty()) throw dimension_error("vstack: no parts");
    Tape* t = parts[0].tape();
    std::vector<Tensor> vals;
    std::vector<int> ids;
    for (const Var& p : parts) {
        same_tape(parts[0], p, "vstack");
        vals.push_back(p.value());
        ids.push_back(p.id());
    }
    Tensor v = resdual::vstack(vals);
    return t->record(std::move(v), ids, [ids](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        std::int64_t r0 = 0;
        for (int id : ids) {
            Tensor& gp = tp.grad_acc(id);
            for (std::int64_t i = 0; i < gp.rows(); ++i)
                for (std::int64_t j = 0; j < gp.cols(); ++j) gp.at(i, j) += g.at(r0 + i, j);
            r0 += gp.rows();
        }
    });
}

Var rms_norm(const Var& x, const Var& gain, double eps) {
    Tape* t = same_tape(x, gain, "rms_norm");
    Tensor v = resdual::rms_norm(x.value(), gain.value(), eps);
    const int ix = x.id(), ig = gain.id();
    return t->record(std::move(v), {ix, ig}, [ix, ig, eps](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        const Tensor& xv = tp.val(ix);
        const Tensor& gv = tp.val(ig);
        Tensor& gx = tp.grad_acc(ix);
        Tensor& gg = tp.grad_acc(ig);
        const std::int64_t d = xv.cols();
        for (std::int64_t i = 0; i < xv.rows(); ++i) {
            double ss = 0.0;
            for (std::int64_t j = 0; j < d; ++j) ss += xv.at(i, j) * xv.at(i, j);
            const double r = std::sqrt(ss / static_cast<double>(d) + eps);
            // s = sum_k dy_k * gain_k * x_k
            double s = 0.0;
            for (std::int64_t j = 0; j < d; ++j) s += g.at(i, j) * gv.at(j) * xv.at(i, j);
            for (std::int64_t j = 0; j < d; ++j) {
                gx.at(i, j) += g.at(i, j) * gv.at(j) / r -
                               xv.at(i, j) * s / (static_cast<double>(d) * r * r * r);
                gg.at(j) += g.at(i, j) * xv.at(i, j) / r;
            }
        }
    });
}

Var softmax_rows(const Var& x) {
    Tape* t = x.tape();
    Tensor v = resdual::softmax_rows(x.value());
    const int ix = x.id();
    return t->record(std::move(v), {ix}, [ix](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        const Tensor& p = tp.val(self);
        Tensor& gx = tp.grad_acc(ix);
        for (std::int64_t i = 0; i < p.rows(); ++i) {
            double dot = 0.0;
            for (std::int64_t j = 0; j < p.cols(); ++j) dot += g.at(i, j) * p.at(i, j);
            for (std::int64_t j = 0; j < p.cols(); ++j)
                gx.at(i, j) += p.at(i, j) * (g.at(i, j) - dot);
        }
    });
}

Var silu(const Var& x) {
    Tape* t = x.tape();
    Tensor v = resdual::silu(x.value());
    const int ix = x.id();
    return t->record(std::move(v), {ix}, [ix](Tape& tp, int self) {
        const Tensor& g = tp.grad_acc(self);
        const Tensor& xv = tp.val(ix);
        Tensor& gx = tp.grad_acc(ix);
        for (std::int64_t i = 0; i < xv.numel(); ++i) {
            const double s = sigmoid_scalar(xv.data()[i]);
            gx.data()[i] += g.data()[i] * (s + xv.data()[i] * s * (1.0 - s));
        }
    });
}

Var sum_squares(const Var& x) {
    Tape* t = x.tape();
    Tensor v = resdual::sum_squares(x.value());
    const int ix = x.id();
    return t->record(std::move(v), {ix}, [ix](Tape& tp, int self) {
        const double g = tp.grad_acc(self).data()[0];
        const Tensor& xv = tp.val(ix);
        Tensor& gx = tp.grad_acc(ix);
        for (std::int64_t i = 0; i < xv.numel(); ++i) gx.data()[i] += 2.0 * xv.data()[i] * g;
    });
}

}  // namespace resdual::ad
