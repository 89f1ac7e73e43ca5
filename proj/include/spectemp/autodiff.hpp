#pragma once

#include "spectemp/tensor.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace spectemp::ad {

class Tape;

// Handle to a node on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    const Matrix& grad() const;
};

// Matrix-valued reverse-mode tape. Nodes are appended in evaluation order, so
// every node's inputs precede it and a single reverse sweep is a valid
// topological traversal.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t)>;

    Var constant(Matrix value);
    Var parameter(Matrix value);

    // Appends a node. `backward` (may be empty) receives the node id and must
    // push the node's gradient into its inputs via accumulate().
    Var push(Matrix value, bool needs_grad, Backward backward);

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    const Matrix& grad(std::size_t id) const;
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    void accumulate(std::size_t id, const Matrix& g);

    // Seeds d(out)/d(out) = 1 for a 1 x 1 node and sweeps backwards.
    void backward(Var out);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        bool has_grad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
    Matrix zero_;
};

// Elementary ops.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var lin(double a, Var u, double b, Var w); // a*u + b*w
Var relu(Var a);
Var sum_squares(Var a);                   // 1 x 1

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Batched graph propagation. x stacks B blocks of N rows; `a` is either one
// N x N matrix shared by every block or B stacked N x N blocks (one per
// sample). Returns blockwise a_b * x_b.
Var graph_propagate(Var a, Var x, int nodes);

// out[:, d*width + j] = m[:, d*width + j] * theta(k, d') with d' = d, or 0 when
// theta has a single column (dims share one coefficient).
Var scale_column_blocks(Var m, Var theta, int k, int width);

// Per-row complex-free block filter: for stacked rows r (variable n = r % nodes)
// and dim blocks d of width s, out[r, block d] = f[r, block d] * W_slot where
// W is (slots * s) x s and slot = slot_index(n, d).
Var row_block_matmul(Var f, Var w, int nodes, int dims, int modes, bool share_nodes, bool share_dims);

// out[:, e*width + t] = sum_d phi(e, d) * z[:, d*width + t].
Var mix_column_blocks(Var z, Var phi, int width);

// Row-wise spectral attention scores. Inputs are (rows) x (D*S) real/imag
// parts of Q and K; output row r holds the S x S softmax map (row-major,
// flattened) of Re(Q_r K_r^T) / sqrt(S * D).
Var attention_scores(Var q_re, Var q_im, Var k_re, Var k_im, int dims, int modes);

// out[r, e*S + i] = sum_j maps[r, i*S + j] * v[r, e*S + j].
Var attention_apply(Var maps, Var v, int dims, int modes);

// Latent-correlation adjacency from per-node embeddings e ((B*N) x E):
// per block, softmax_j( e_i . e_j / sqrt(E) ) over j != i, then (A + A^T) / 2.
Var latent_adjacency(Var embeddings, int nodes);

// Per block: D^{-1/2} A D^{-1/2}. Zero-degree rows map to the identity row,
// matching I - L_hat under the isolated-node convention.
Var normalize_adjacency(Var a, int nodes);

} // namespace spectemp::ad
