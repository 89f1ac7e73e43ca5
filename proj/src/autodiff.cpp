#include "spectemp/autodiff.hpp"

#include "spectemp/errors.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace spectemp::ad {

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::parameter(Matrix value) { return push(std::move(value), true, {}); }

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    if (needs_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

const Matrix& Tape::grad(std::size_t id) const {
    const Node& n = nodes_[id];
    if (!n.has_grad) {
        auto& z = const_cast<Matrix&>(zero_);
        z = Matrix::Zero(n.value.rows(), n.value.cols());
        return zero_;
    }
    return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        n.grad += g;
    }
}

void Tape::backward(Var out) {
    if (value(out.id).size() != 1) throw ShapeError("backward: output must be 1 x 1");
    for (auto& n : nodes_) {
        n.has_grad = false;
        n.grad.resize(0, 0);
    }
    accumulate(out.id, Matrix::Ones(1, 1));
    for (std::size_t i = out.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.has_grad && n.backward) n.backward(*this, i);
    }
}

namespace {

Tape& tape_of(Var a, Var b) {
    if (a.tape != b.tape || a.tape == nullptr) throw ShapeError("operands live on different tapes");
    return *a.tape;
}

bool any_grad(Tape& t, std::initializer_list<Var> vars) {
    for (Var v : vars)
        if (t.needs_grad(v.id)) return true;
    return false;
}

std::vector<Eigen::Index> block_rows(int blocks, int nodes, int n) {
    std::vector<Eigen::Index> rows(blocks);
    for (int b = 0; b < blocks; ++b) rows[b] = static_cast<Eigen::Index>(b) * nodes + n;
    return rows;
}

// Row r of a (rows) x (D*S) matrix as an S x D matrix.
Matrix unpack_row(const Matrix& m, Eigen::Index r, int dims, int modes) {
    Matrix out(modes, dims);
    for (int d = 0; d < dims; ++d)
        for (int i = 0; i < modes; ++i) out(i, d) = m(r, d * modes + i);
    return out;
}

void pack_row(Matrix& m, Eigen::Index r, const Matrix& block) {
    const auto modes = block.rows();
    for (Eigen::Index d = 0; d < block.cols(); ++d)
        for (Eigen::Index i = 0; i < modes; ++i) m(r, d * modes + i) = block(i, d);
}

} // namespace

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dimensions differ");
    return t.push(av * bv, any_grad(t, {a, b}), [a, b](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (tp.needs_grad(a.id)) tp.accumulate(a.id, g * tp.value(b.id).transpose());
        if (tp.needs_grad(b.id)) tp.accumulate(b.id, tp.value(a.id).transpose() * g);
    });
}

Var lin(double ca, Var u, double cb, Var w) {
    Tape& t = tape_of(u, w);
    if (u.value().rows() != w.value().rows() || u.value().cols() != w.value().cols()) {
        throw ShapeError("lin: operand shapes differ");
    }
    return t.push(ca * u.value() + cb * w.value(), any_grad(t, {u, w}),
                  [u, w, ca, cb](Tape& tp, std::size_t self) {
                      const Matrix& g = tp.grad(self);
                      if (tp.needs_grad(u.id)) tp.accumulate(u.id, ca * g);
                      if (tp.needs_grad(w.id)) tp.accumulate(w.id, cb * g);
                  });
}

Var add(Var a, Var b) { return lin(1.0, a, 1.0, b); }
Var sub(Var a, Var b) { return lin(1.0, a, -1.0, b); }

Var scale(Var a, double s) {
    Tape& t = *a.tape;
    return t.push(s * a.value(), t.needs_grad(a.id), [a, s](Tape& tp, std::size_t self) {
        tp.accumulate(a.id, s * tp.grad(self));
    });
}

Var relu(Var a) {
    Tape& t = *a.tape;
    return t.push(a.value().cwiseMax(0.0), t.needs_grad(a.id), [a](Tape& tp, std::size_t self) {
        const Matrix mask = (tp.value(a.id).array() > 0.0).cast<double>().matrix();
        tp.accumulate(a.id, tp.grad(self).cwiseProduct(mask));
    });
}

Var sum_squares(Var a) {
    Tape& t = *a.tape;
    Matrix v(1, 1);
    v(0, 0) = a.value().squaredNorm();
    return t.push(std::move(v), t.needs_grad(a.id), [a](Tape& tp, std::size_t self) {
        tp.accumulate(a.id, 2.0 * tp.grad(self)(0, 0) * tp.value(a.id));
    });
}

Var graph_propagate(Var a, Var x, int nodes) {
    Tape& t = tape_of(a, x);
    const Matrix& av = a.value();
    const Matrix& xv = x.value();
    if (av.cols() != nodes || xv.rows() % nodes != 0 || av.rows() % nodes != 0) {
        throw ShapeError("graph_propagate: row counts are not multiples of the node count");
    }
    const int blocks = static_cast<int>(xv.rows() / nodes);
    const bool shared = av.rows() == nodes;
    if (!shared && av.rows() != xv.rows()) {
        throw ShapeError("graph_propagate: need one adjacency or one per sample");
    }
    Matrix out(xv.rows(), xv.cols());
    for (int b = 0; b < blocks; ++b) {
        const auto ab = shared ? av.topRows(nodes) : av.middleRows(b * nodes, nodes);
        out.middleRows(b * nodes, nodes).noalias() = ab * xv.middleRows(b * nodes, nodes);
    }
    return t.push(std::move(out), any_grad(t, {a, x}),
                  [a, x, nodes, blocks, shared](Tape& tp, std::size_t self) {
                      const Matrix& g = tp.grad(self);
                      const Matrix& av = tp.value(a.id);
                      const Matrix& xv = tp.value(x.id);
                      if (tp.needs_grad(x.id)) {
                          Matrix dx(xv.rows(), xv.cols());
                          for (int b = 0; b < blocks; ++b) {
                              const auto ab = shared ? av.topRows(nodes) : av.middleRows(b * nodes, nodes);
                              dx.middleRows(b * nodes, nodes).noalias() =
                                  ab.transpose() * g.middleRows(b * nodes, nodes);
                          }
                          tp.accumulate(x.id, dx);
                      }
                      if (tp.needs_grad(a.id)) {
                          Matrix da = Matrix::Zero(av.rows(), av.cols());
                          for (int b = 0; b < blocks; ++b) {
                              const Matrix gb = g.middleRows(b * nodes, nodes) *
                                                xv.middleRows(b * nodes, nodes).transpose();
                              if (shared) {
                                  da += gb;
                              } else {
                                  da.middleRows(b * nodes, nodes) = gb;
                              }
                          }
                          tp.accumulate(a.id, da);
                      }
                  });
}

Var scale_column_blocks(Var m, Var theta, int k, int width) {
    Tape& t = tape_of(m, theta);
    const Matrix& mv = m.value();
    const Matrix& th = theta.value();
    if (width <= 0 || mv.cols() % width != 0) throw ShapeError("scale_column_blocks: bad block width");
    const int dims = static_cast<int>(mv.cols() / width);
    if (k < 0 || k >= th.rows() || (th.cols() != dims && th.cols() != 1)) {
        throw ShapeError("scale_column_blocks: coefficient shape mismatch");
    }
    auto coef_col = [dims, &th](int d) { return th.cols() == 1 ? 0 : d; };
    Matrix out(mv.rows(), mv.cols());
    for (int d = 0; d < dims; ++d) {
        out.middleCols(d * width, width) = th(k, coef_col(d)) * mv.middleCols(d * width, width);
    }
    return t.push(std::move(out), any_grad(t, {m, theta}), [m, theta, k, width, dims](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& mv = tp.value(m.id);
        const Matrix& th = tp.value(theta.id);
        const bool shared = th.cols() == 1;
        if (tp.needs_grad(m.id)) {
            Matrix dm(mv.rows(), mv.cols());
            for (int d = 0; d < dims; ++d) {
                dm.middleCols(d * width, width) = th(k, shared ? 0 : d) * g.middleCols(d * width, width);
            }
            tp.accumulate(m.id, dm);
        }
        if (tp.needs_grad(theta.id)) {
            Matrix dth = Matrix::Zero(th.rows(), th.cols());
            for (int d = 0; d < dims; ++d) {
                dth(k, shared ? 0 : d) +=
                    g.middleCols(d * width, width).cwiseProduct(mv.middleCols(d * width, width)).sum();
            }
            tp.accumulate(theta.id, dth);
        }
    });
}

Var row_block_matmul(Var f, Var w, int nodes, int dims, int modes, bool share_nodes, bool share_dims) {
    Tape& t = tape_of(f, w);
    const Matrix& fv = f.value();
    const Matrix& wv = w.value();
    const int slots = (share_nodes ? 1 : nodes) * (share_dims ? 1 : dims);
    if (fv.cols() != static_cast<Eigen::Index>(dims) * modes || fv.rows() % nodes != 0) {
        throw ShapeError("row_block_matmul: input is not (B*N) x (D*S)");
    }
    if (wv.rows() != static_cast<Eigen::Index>(slots) * modes || wv.cols() != modes) {
        throw ShapeError("row_block_matmul: weight stack has the wrong shape");
    }
    const int blocks = static_cast<int>(fv.rows() / nodes);
    auto slot_of = [=](int n, int d) {
        return (share_nodes ? 0 : n) * (share_dims ? 1 : dims) + (share_dims ? 0 : d);
    };
    Matrix out(fv.rows(), fv.cols());
    for (int n = 0; n < nodes; ++n) {
        const auto rows = block_rows(blocks, nodes, n);
        for (int d = 0; d < dims; ++d) {
            const auto cols = Eigen::seqN(d * modes, modes);
            out(rows, cols) = fv(rows, cols) * wv.middleRows(slot_of(n, d) * modes, modes);
        }
    }
    return t.push(std::move(out), any_grad(t, {f, w}),
                  [f, w, nodes, dims, modes, blocks, slot_of](Tape& tp, std::size_t self) {
                      const Matrix& g = tp.grad(self);
                      const Matrix& fv = tp.value(f.id);
                      const Matrix& wv = tp.value(w.id);
                      const bool want_f = tp.needs_grad(f.id);
                      const bool want_w = tp.needs_grad(w.id);
                      Matrix df = want_f ? Matrix(fv.rows(), fv.cols()) : Matrix();
                      Matrix dw = want_w ? Matrix::Zero(wv.rows(), wv.cols()) : Matrix();
                      for (int n = 0; n < nodes; ++n) {
                          const auto rows = block_rows(blocks, nodes, n);
                          for (int d = 0; d < dims; ++d) {
                              const auto cols = Eigen::seqN(d * modes, modes);
                              const int slot = slot_of(n, d);
                              const Matrix gb = g(rows, cols);
                              if (want_f) df(rows, cols) = gb * wv.middleRows(slot * modes, modes).transpose();
                              if (want_w) {
                                  dw.middleRows(slot * modes, modes) += Matrix(fv(rows, cols)).transpose() * gb;
                              }
                          }
                      }
                      if (want_f) tp.accumulate(f.id, df);
                      if (want_w) tp.accumulate(w.id, dw);
                  });
}

Var mix_column_blocks(Var z, Var phi, int width) {
    Tape& t = tape_of(z, phi);
    const Matrix& zv = z.value();
    const Matrix& pv = phi.value();
    if (width <= 0 || zv.cols() % width != 0) throw ShapeError("mix_column_blocks: bad block width");
    const int dims = static_cast<int>(zv.cols() / width);
    if (pv.rows() != dims || pv.cols() != dims) throw ShapeError("mix_column_blocks: projection must be D x D");
    Matrix out = Matrix::Zero(zv.rows(), zv.cols());
    for (int e = 0; e < dims; ++e)
        for (int d = 0; d < dims; ++d)
            out.middleCols(e * width, width) += pv(e, d) * zv.middleCols(d * width, width);
    return t.push(std::move(out), any_grad(t, {z, phi}), [z, phi, width, dims](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& zv = tp.value(z.id);
        const Matrix& pv = tp.value(phi.id);
        if (tp.needs_grad(z.id)) {
            Matrix dz = Matrix::Zero(zv.rows(), zv.cols());
            for (int e = 0; e < dims; ++e)
                for (int d = 0; d < dims; ++d)
                    dz.middleCols(d * width, width) += pv(e, d) * g.middleCols(e * width, width);
            tp.accumulate(z.id, dz);
        }
        if (tp.needs_grad(phi.id)) {
            Matrix dp(dims, dims);
            for (int e = 0; e < dims; ++e)
                for (int d = 0; d < dims; ++d)
                    dp(e, d) = g.middleCols(e * width, width).cwiseProduct(zv.middleCols(d * width, width)).sum();
            tp.accumulate(phi.id, dp);
        }
    });
}

Var attention_scores(Var q_re, Var q_im, Var k_re, Var k_im, int dims, int modes) {
    Tape& t = *q_re.tape;
    const Eigen::Index rows = q_re.value().rows();
    for (Var v : {q_re, q_im, k_re, k_im}) {
        if (v.tape != &t || v.value().rows() != rows || v.value().cols() != static_cast<Eigen::Index>(dims) * modes) {
            throw ShapeError("attention_scores: Q/K parts must all be rows x (D*S)");
        }
    }
    const double c = 1.0 / std::sqrt(static_cast<double>(modes) * dims);
    Matrix out(rows, static_cast<Eigen::Index>(modes) * modes);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Matrix qr = unpack_row(q_re.value(), r, dims, modes);
        const Matrix qi = unpack_row(q_im.value(), r, dims, modes);
        const Matrix kr = unpack_row(k_re.value(), r, dims, modes);
        const Matrix ki = unpack_row(k_im.value(), r, dims, modes);
        Matrix s = c * (qr * kr.transpose() - qi * ki.transpose());
        for (int i = 0; i < modes; ++i) {
            const double m = s.row(i).maxCoeff();
            s.row(i) = (s.row(i).array() - m).exp().matrix();
            s.row(i) /= s.row(i).sum();
        }
        for (int i = 0; i < modes; ++i)
            for (int j = 0; j < modes; ++j) out(r, i * modes + j) = s(i, j);
    }
    return t.push(std::move(out), any_grad(t, {q_re, q_im, k_re, k_im}),
                  [q_re, q_im, k_re, k_im, dims, modes, c](Tape& tp, std::size_t self) {
                      const Matrix& g = tp.grad(self);
                      const Matrix& maps = tp.value(self);
                      const Eigen::Index rows = maps.rows();
                      const Eigen::Index width = static_cast<Eigen::Index>(dims) * modes;
                      Matrix dqr(rows, width), dqi(rows, width), dkr(rows, width), dki(rows, width);
                      for (Eigen::Index r = 0; r < rows; ++r) {
                          Matrix a(modes, modes), ga(modes, modes);
                          for (int i = 0; i < modes; ++i)
                              for (int j = 0; j < modes; ++j) {
                                  a(i, j) = maps(r, i * modes + j);
                                  ga(i, j) = g(r, i * modes + j);
                              }
                          // softmax Jacobian, row by row
                          const Vector inner = (ga.cwiseProduct(a)).rowwise().sum();
                          const Matrix ds = a.cwiseProduct(ga - inner.replicate(1, modes));
                          const Matrix qr = unpack_row(tp.value(q_re.id), r, dims, modes);
                          const Matrix qi = unpack_row(tp.value(q_im.id), r, dims, modes);
                          const Matrix kr = unpack_row(tp.value(k_re.id), r, dims, modes);
                          const Matrix ki = unpack_row(tp.value(k_im.id), r, dims, modes);
                          pack_row(dqr, r, c * ds * kr);
                          pack_row(dkr, r, c * ds.transpose() * qr);
                          pack_row(dqi, r, -c * ds * ki);
                          pack_row(dki, r, -c * ds.transpose() * qi);
                      }
                      tp.accumulate(q_re.id, dqr);
                      tp.accumulate(q_im.id, dqi);
                      tp.accumulate(k_re.id, dkr);
                      tp.accumulate(k_im.id, dki);
                  });
}

Var attention_apply(Var maps, Var v, int dims, int modes) {
    Tape& t = tape_of(maps, v);
    const Matrix& mv = maps.value();
    const Matrix& vv = v.value();
    if (mv.rows() != vv.rows() || mv.cols() != static_cast<Eigen::Index>(modes) * modes ||
        vv.cols() != static_cast<Eigen::Index>(dims) * modes) {
        throw ShapeError("attention_apply: shape mismatch");
    }
    auto map_at = [modes](const Matrix& m, Eigen::Index r) {
        Matrix a(modes, modes);
        for (int i = 0; i < modes; ++i)
            for (int j = 0; j < modes; ++j) a(i, j) = m(r, i * modes + j);
        return a;
    };
    Matrix out(vv.rows(), vv.cols());
    for (Eigen::Index r = 0; r < vv.rows(); ++r) {
        pack_row(out, r, map_at(mv, r) * unpack_row(vv, r, dims, modes));
    }
    return t.push(std::move(out), any_grad(t, {maps, v}), [maps, v, dims, modes, map_at](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& mv = tp.value(maps.id);
        const Matrix& vv = tp.value(v.id);
        Matrix dm(mv.rows(), mv.cols());
        Matrix dv(vv.rows(), vv.cols());
        for (Eigen::Index r = 0; r < vv.rows(); ++r) {
            const Matrix a = map_at(mv, r);
            const Matrix vb = unpack_row(vv, r, dims, modes);
            const Matrix gb = unpack_row(g, r, dims, modes);
            const Matrix da = gb * vb.transpose();
            for (int i = 0; i < modes; ++i)
                for (int j = 0; j < modes; ++j) dm(r, i * modes + j) = da(i, j);
            pack_row(dv, r, a.transpose() * gb);
        }
        tp.accumulate(maps.id, dm);
        tp.accumulate(v.id, dv);
    });
}

Var latent_adjacency(Var embeddings, int nodes) {
    Tape& t = *embeddings.tape;
    const Matrix& ev = embeddings.value();
    if (ev.rows() % nodes != 0) throw ShapeError("latent_adjacency: rows must be a multiple of N");
    const int blocks = static_cast<int>(ev.rows() / nodes);
    const double c = 1.0 / std::sqrt(static_cast<double>(ev.cols()));
    // Row-softmax maps are kept for the backward pass.
    auto probs = std::make_shared<Matrix>(ev.rows(), nodes);
    Matrix out(ev.rows(), nodes);
    for (int b = 0; b < blocks; ++b) {
        const auto eb = ev.middleRows(b * nodes, nodes);
        Matrix s = c * eb * eb.transpose();
        Matrix p = Matrix::Zero(nodes, nodes);
        for (int i = 0; i < nodes; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < nodes; ++j)
                if (j != i) m = std::max(m, s(i, j));
            double total = 0.0;
            for (int j = 0; j < nodes; ++j) {
                if (j == i) continue;
                p(i, j) = std::exp(s(i, j) - m);
                total += p(i, j);
            }
            if (total > 0.0) p.row(i) /= total;
        }
        probs->middleRows(b * nodes, nodes) = p;
        out.middleRows(b * nodes, nodes) = 0.5 * (p + p.transpose());
    }
    return t.push(std::move(out), t.needs_grad(embeddings.id),
                  [embeddings, nodes, blocks, c, probs](Tape& tp, std::size_t self) {
                      const Matrix& g = tp.grad(self);
                      const Matrix& ev = tp.value(embeddings.id);
                      Matrix de(ev.rows(), ev.cols());
                      for (int b = 0; b < blocks; ++b) {
                          const Matrix gb = g.middleRows(b * nodes, nodes);
                          const Matrix gp = 0.5 * (gb + gb.transpose());
                          const Matrix p = probs->middleRows(b * nodes, nodes);
                          const Vector inner = gp.cwiseProduct(p).rowwise().sum();
                          Matrix ds = p.cwiseProduct(gp - inner.replicate(1, nodes));
                          ds.diagonal().setZero();
                          const auto eb = ev.middleRows(b * nodes, nodes);
                          de.middleRows(b * nodes, nodes) = c * (ds + ds.transpose()) * eb;
                      }
                      tp.accumulate(embeddings.id, de);
                  });
}

Var normalize_adjacency(Var a, int nodes) {
    Tape& t = *a.tape;
    const Matrix& av = a.value();
    if (av.cols() != nodes || av.rows() % nodes != 0) {
        throw ShapeError("normalize_adjacency: expected stacked N x N blocks");
    }
    const int blocks = static_cast<int>(av.rows() / nodes);
    Matrix out(av.rows(), nodes);
    Vector inv_sqrt(av.rows());
    for (int b = 0; b < blocks; ++b) {
        const auto ab = av.middleRows(b * nodes, nodes);
        for (int i = 0; i < nodes; ++i) {
            const double deg = ab.row(i).sum();
            inv_sqrt(b * nodes + i) = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
        }
        for (int i = 0; i < nodes; ++i)
            for (int j = 0; j < nodes; ++j)
                out(b * nodes + i, j) = inv_sqrt(b * nodes + i) * ab(i, j) * inv_sqrt(b * nodes + j);
        for (int i = 0; i < nodes; ++i)
            if (inv_sqrt(b * nodes + i) == 0.0) out(b * nodes + i, i) = 1.0;
    }
    return t.push(std::move(out), t.needs_grad(a.id), [a, nodes, blocks, inv_sqrt](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& av = tp.value(a.id);
        Matrix da = Matrix::Zero(av.rows(), av.cols());
        for (int b = 0; b < blocks; ++b) {
            const int off = b * nodes;
            for (int i = 0; i < nodes; ++i) {
                const double si = inv_sqrt(off + i);
                if (si == 0.0) continue;
                double ds = 0.0;
                for (int j = 0; j < nodes; ++j) {
                    const double sj = inv_sqrt(off + j);
                    da(off + i, j) += g(off + i, j) * si * sj;
                    ds += g(off + i, j) * av(off + i, j) * sj + g(off + j, i) * sj * av(off + j, i);
                }
                // d s_i / d deg_i = -1/2 deg_i^{-3/2} = -1/2 s_i^3
                const double ddeg = -0.5 * si * si * si * ds;
                for (int j = 0; j < nodes; ++j) da(off + i, j) += ddeg;
            }
        }
        tp.accumulate(a.id, da);
    });
}

} // namespace spectemp::ad
