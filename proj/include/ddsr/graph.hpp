#pragma once

#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ddsr/ops.hpp"
#include "ddsr/tensor.hpp"
#include "ddsr/wavelet.hpp"

namespace ddsr {

template <typename Scalar>
class Graph;

// Handle to a value recorded on a Graph.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  Index id = -1;
};

// Reverse-mode tape. Forward operators append nodes; backward() walks the
// tape once in reverse and accumulates gradients into every bound Parameter.
template <typename Scalar>
class Graph {
 public:
  using BackpropFn = std::function<void(Graph&, Index)>;

  Var<Scalar> constant(Tensor<Scalar> v) { return make(std::move(v), false, nullptr); }

  Var<Scalar> input(Tensor<Scalar> v, bool needs_grad = false) {
    return make(std::move(v), needs_grad, nullptr);
  }

  // Binds a parameter leaf; repeated use() of the same parameter returns the
  // same node so shared weights accumulate one summed gradient.
  Var<Scalar> use(Parameter<Scalar>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return {this, it->second};
    Var<Scalar> v = make(p.value, true, nullptr);
    nodes_[static_cast<std::size_t>(v.id)].bound = &p;
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  const Tensor<Scalar>& value(Var<Scalar> v) const { return node_at(v).value; }
  const Tensor<Scalar>& value(Index id) const { return node_ref(id).value; }

  // Gradient of the last backward() w.r.t. this node (zeros if unreached).
  Tensor<Scalar> grad(Var<Scalar> v) const {
    const NodeRec& n = node_at(v);
    return n.grad_live ? n.grad : Tensor<Scalar>(n.value.shape());
  }

  bool needs_grad(Index id) const { return node_ref(id).needs_grad; }

  Tensor<Scalar>& grad_buffer(Index id) {
    NodeRec& n = node_ref(id);
    if (!n.grad_live) {
      n.grad = Tensor<Scalar>(n.value.shape());
      n.grad_live = true;
    }
    return n.grad;
  }

  Var<Scalar> make(Tensor<Scalar> value, bool needs_grad, BackpropFn bp) {
    NodeRec n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backprop = std::move(bp);
    nodes_.push_back(std::move(n));
    return {this, static_cast<Index>(nodes_.size()) - 1};
  }

  Index size() const { return static_cast<Index>(nodes_.size()); }

  // Reverse sweep from `loss` (a scalar node). Each bound Parameter's grad
  // is incremented, so gradients add across calls unless zero_grad() ran.
  void backward(Var<Scalar> loss) {
    if (nodes_.empty()) throw ShapeError("backward: no recorded forward computation");
    if (loss.graph != this || loss.id < 0 || loss.id >= size()) {
      throw ShapeError("backward: loss does not belong to this graph");
    }
    if (ran_backward_) throw ShapeError("backward: already called on this graph");
    const NodeRec& ln = node_ref(loss.id);
    if (ln.value.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got " + shape_str(ln.value.shape()));
    }
    ran_backward_ = true;
    grad_buffer(loss.id)[0] = Scalar(1);
    for (Index i = loss.id; i >= 0; --i) {
      NodeRec& n = node_ref(i);
      if (!n.grad_live) continue;
      if (n.backprop) n.backprop(*this, i);
      if (n.bound != nullptr) n.bound->grad.array() += n.grad.array();
    }
  }

 private:
  struct NodeRec {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    bool needs_grad = false;
    bool grad_live = false;
    Parameter<Scalar>* bound = nullptr;
    BackpropFn backprop;
  };

  NodeRec& node_ref(Index id) { return nodes_[static_cast<std::size_t>(id)]; }
  const NodeRec& node_ref(Index id) const { return nodes_[static_cast<std::size_t>(id)]; }

  const NodeRec& node_at(Var<Scalar> v) const {
    if (v.graph != this || v.id < 0 || v.id >= size()) {
      throw ShapeError("Graph: var does not belong to this graph");
    }
    return node_ref(v.id);
  }

  std::vector<NodeRec> nodes_;
  std::unordered_map<const Parameter<Scalar>*, Index> param_nodes_;
  bool ran_backward_ = false;
};

namespace detail {

template <typename Scalar>
void check_graph(const Graph<Scalar>* g, Var<Scalar> v) {
  if (v.graph != g) throw ShapeError("Graph op: vars from different graphs");
}

template <typename Scalar, typename... Rest>
Graph<Scalar>& same_graph(Var<Scalar> first, Rest... rest) {
  if (first.graph == nullptr) throw ShapeError("Graph op: unbound var");
  (check_graph(first.graph, rest), ...);
  return *first.graph;
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  Graph<Scalar>& g = detail::same_graph(x, w, b);
  Tensor<Scalar> out = conv2d(g.value(x), g.value(w), g.value(b));
  const bool ng = g.needs_grad(x.id) || g.needs_grad(w.id) || g.needs_grad(b.id);
  const Index xi = x.id, wi = w.id, bi = b.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [xi, wi, bi](Graph<Scalar>& gr, Index self) {
      const Tensor<Scalar>& go = gr.grad_buffer(self);
      Tensor<Scalar>* gx = gr.needs_grad(xi) ? &gr.grad_buffer(xi) : nullptr;
      Tensor<Scalar>* gw = gr.needs_grad(wi) ? &gr.grad_buffer(wi) : nullptr;
      Tensor<Scalar>* gb = gr.needs_grad(bi) ? &gr.grad_buffer(bi) : nullptr;
      conv2d_backward(gr.value(xi), gr.value(wi), go, gx, gw, gb);
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  Graph<Scalar>& g = detail::same_graph(x);
  Tensor<Scalar> out = relu(g.value(x));
  const bool ng = g.needs_grad(x.id);
  const Index xi = x.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [xi](Graph<Scalar>& gr, Index self) {
      relu_backward(gr.value(xi), gr.grad_buffer(self), gr.grad_buffer(xi));
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

template <typename Scalar>
Var<Scalar> bilinear_upsample(Var<Scalar> x, Index s) {
  Graph<Scalar>& g = detail::same_graph(x);
  Tensor<Scalar> out = bilinear_upsample(g.value(x), s);
  const bool ng = g.needs_grad(x.id);
  const Index xi = x.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [xi, s](Graph<Scalar>& gr, Index self) {
      bilinear_upsample_backward(gr.grad_buffer(self), s, gr.grad_buffer(xi));
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  Graph<Scalar>& g = detail::same_graph(a, b);
  check_same_shape(g.value(a), g.value(b), "add");
  Tensor<Scalar> out(g.value(a).shape());
  out.array() = g.value(a).array() + g.value(b).array();
  const bool ng = g.needs_grad(a.id) || g.needs_grad(b.id);
  const Index ai = a.id, bi = b.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [ai, bi](Graph<Scalar>& gr, Index self) {
      const Tensor<Scalar>& go = gr.grad_buffer(self);
      if (gr.needs_grad(ai)) gr.grad_buffer(ai).array() += go.array();
      if (gr.needs_grad(bi)) gr.grad_buffer(bi).array() += go.array();
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

// Elementwise product of same-shaped vars.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  Graph<Scalar>& g = detail::same_graph(a, b);
  check_same_shape(g.value(a), g.value(b), "mul");
  Tensor<Scalar> out(g.value(a).shape());
  out.array() = g.value(a).array() * g.value(b).array();
  const bool ng = g.needs_grad(a.id) || g.needs_grad(b.id);
  const Index ai = a.id, bi = b.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [ai, bi](Graph<Scalar>& gr, Index self) {
      const Tensor<Scalar>& go = gr.grad_buffer(self);
      if (gr.needs_grad(ai)) gr.grad_buffer(ai).array() += go.array() * gr.value(bi).array();
      if (gr.needs_grad(bi)) gr.grad_buffer(bi).array() += go.array() * gr.value(ai).array();
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> x, Scalar k) {
  Graph<Scalar>& g = detail::same_graph(x);
  Tensor<Scalar> out(g.value(x).shape());
  out.array() = g.value(x).array() * k;
  const bool ng = g.needs_grad(x.id);
  const Index xi = x.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [xi, k](Graph<Scalar>& gr, Index self) {
      gr.grad_buffer(xi).array() += gr.grad_buffer(self).array() * k;
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

template <typename Scalar>
Var<Scalar> dwt_ll(Var<Scalar> x) {
  Graph<Scalar>& g = detail::same_graph(x);
  Tensor<Scalar> out = dwt2_ll(g.value(x));
  const bool ng = g.needs_grad(x.id);
  const Index xi = x.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [xi](Graph<Scalar>& gr, Index self) {
      dwt2_ll_adjoint(gr.grad_buffer(self), gr.grad_buffer(xi));
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

template <typename Scalar>
Var<Scalar> dwt_high(Var<Scalar> x) {
  Graph<Scalar>& g = detail::same_graph(x);
  Tensor<Scalar> out = dwt2_high(g.value(x));
  const bool ng = g.needs_grad(x.id);
  const Index xi = x.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [xi](Graph<Scalar>& gr, Index self) {
      dwt2_high_adjoint(gr.grad_buffer(self), gr.grad_buffer(xi));
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

template <typename Scalar>
Var<Scalar> idwt(Var<Scalar> ll, Var<Scalar> high) {
  Graph<Scalar>& g = detail::same_graph(ll, high);
  Tensor<Scalar> out = idwt2_from(g.value(ll), g.value(high));
  const bool ng = g.needs_grad(ll.id) || g.needs_grad(high.id);
  const Index li = ll.id, hi = high.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [li, hi](Graph<Scalar>& gr, Index self) {
      const Tensor<Scalar>& go = gr.grad_buffer(self);
      if (gr.needs_grad(li)) gr.grad_buffer(li).array() += dwt2_ll(go).array();
      if (gr.needs_grad(hi)) gr.grad_buffer(hi).array() += dwt2_high(go).array();
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

// Contiguous batch slice [begin, begin+count).
template <typename Scalar>
Var<Scalar> slice_batch(Var<Scalar> x, Index begin, Index count) {
  Graph<Scalar>& g = detail::same_graph(x);
  const Tensor<Scalar>& xv = g.value(x);
  if (begin < 0 || count < 0 || begin + count > xv.batch()) {
    throw ShapeError("slice_batch: range out of bounds");
  }
  const Index stride = xv.channels() * xv.height() * xv.width();
  Tensor<Scalar> out(count, xv.channels(), xv.height(), xv.width());
  std::copy(xv.data() + begin * stride, xv.data() + (begin + count) * stride, out.data());
  const bool ng = g.needs_grad(x.id);
  const Index xi = x.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [xi, begin, stride](Graph<Scalar>& gr, Index self) {
      const Tensor<Scalar>& go = gr.grad_buffer(self);
      Tensor<Scalar>& gx = gr.grad_buffer(xi);
      Eigen::Map<typename Tensor<Scalar>::ArrayX>(gx.data() + begin * stride, go.size()) +=
          go.array();
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

template <typename Scalar>
Var<Scalar> concat_batch(Var<Scalar> a, Var<Scalar> b, Var<Scalar> c) {
  Graph<Scalar>& g = detail::same_graph(a, b, c);
  const Tensor<Scalar>& av = g.value(a);
  const Tensor<Scalar>& bv = g.value(b);
  const Tensor<Scalar>& cv = g.value(c);
  if (av.channels() != bv.channels() || av.channels() != cv.channels() ||
      av.height() != bv.height() || av.height() != cv.height() || av.width() != bv.width() ||
      av.width() != cv.width()) {
    throw ShapeError("concat_batch: mismatched inner shapes");
  }
  Tensor<Scalar> out(av.batch() + bv.batch() + cv.batch(), av.channels(), av.height(),
                     av.width());
  std::copy(av.data(), av.data() + av.size(), out.data());
  std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  std::copy(cv.data(), cv.data() + cv.size(), out.data() + av.size() + bv.size());
  const bool ng = g.needs_grad(a.id) || g.needs_grad(b.id) || g.needs_grad(c.id);
  const Index ai = a.id, bi = b.id, ci = c.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [ai, bi, ci](Graph<Scalar>& gr, Index self) {
      const Tensor<Scalar>& go = gr.grad_buffer(self);
      Index off = 0;
      for (Index id : {ai, bi, ci}) {
        const Index n = gr.value(id).size();
        if (gr.needs_grad(id)) {
          gr.grad_buffer(id).array() +=
              Eigen::Map<const typename Tensor<Scalar>::ArrayX>(go.data() + off, n);
        }
        off += n;
      }
    };
  }
  return g.make(std::move(out), ng, std::move(bp));
}

// Mean Huber loss against a fixed target; yields a scalar node.
template <typename Scalar>
Var<Scalar> huber_term(Var<Scalar> pred, Tensor<Scalar> target, Scalar delta) {
  Graph<Scalar>& g = detail::same_graph(pred);
  const Scalar loss = huber(g.value(pred), target, delta);
  const bool ng = g.needs_grad(pred.id);
  const Index pi = pred.id;
  typename Graph<Scalar>::BackpropFn bp;
  if (ng) {
    bp = [pi, t = std::move(target), delta](Graph<Scalar>& gr, Index self) {
      const Scalar upstream = gr.grad_buffer(self)[0];
      huber_backward(gr.value(pi), t, delta, upstream, gr.grad_buffer(pi));
    };
  }
  return g.make(Tensor<Scalar>::scalar(loss), ng, std::move(bp));
}

}  // namespace ddsr
