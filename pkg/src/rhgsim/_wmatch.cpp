// Exact maximum-weight matching on general graphs (Galil's primal-dual
// blossom method, O(V^3)).  The structure is a faithful port of Van
// Rantwijk's widely used reference implementation (the same one vendored by
// networkx), specialised to integer node ids and int64 weights so that all
// dual arithmetic is exact.
//
// Node convention: vertices are 0..n-1; non-trivial blossoms occupy ids
// n..2n-1 and are recycled through a free pool.  "2*u(v)" bookkeeping and the
// stage/substage flow follow the reference implementation line for line.
//
// Exposed interfaces:
//   * pybind11 `max_weight_matching(ii, jj, ww, n, maxcardinality, verify)`
//     for tests and the Python-level decoder.
//   * extern "C" `wmatch_solve_dense(n, dmat_addr, mate_addr)` consuming a
//     dense symmetric distance matrix and returning the MINIMUM-weight
//     perfect matching (weights are negated/offset and quantised internally);
//     callable from a numba kernel through ctypes.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace {

using std::int64_t;
using std::vector;

constexpr int kNone = -1;
constexpr int kNoNode = -2;

struct Edge {
  int i;
  int j;
  int64_t w;
};

class Matcher {
 public:
  Matcher(int n, const vector<Edge>& edges, bool maxcardinality)
      : n_(n), maxcard_(maxcardinality) {
    // Dense weight matrix + adjacency; parallel edges keep the best weight.
    wmat_.assign(static_cast<size_t>(n_) * n_, INT64_MIN);
    has_edge_.assign(static_cast<size_t>(n_) * n_, 0);
    maxweight_ = 0;
    for (const Edge& e : edges) {
      if (e.i == e.j) continue;  // ignore self-loops
      if (e.i < 0 || e.j < 0 || e.i >= n_ || e.j >= n_)
        throw std::invalid_argument("edge endpoint out of range");
      size_t a = idx(e.i, e.j), b = idx(e.j, e.i);
      if (!has_edge_[a] || e.w > wmat_[a]) wmat_[a] = wmat_[b] = e.w;
      has_edge_[a] = has_edge_[b] = 1;
      maxweight_ = std::max(maxweight_, e.w);
    }
    neighbors_.assign(n_, {});
    for (int v = 0; v < n_; ++v)
      for (int w = 0; w < n_; ++w)
        if (v != w && has_edge_[idx(v, w)]) neighbors_[v].push_back(w);

    int m = 2 * n_;
    mate_.assign(n_, kNone);
    label_.assign(m, 0);
    labeledge_v_.assign(m, kNone);
    labeledge_w_.assign(m, kNone);
    inblossom_.resize(n_);
    for (int v = 0; v < n_; ++v) inblossom_[v] = v;
    blossomparent_.assign(m, kNone);
    blossombase_.assign(m, kNone);
    for (int v = 0; v < n_; ++v) blossombase_[v] = v;
    bestedge_v_.assign(m, kNone);
    bestedge_w_.assign(m, kNone);
    dualvar_.assign(n_, maxweight_);
    blossomdual_.assign(m, 0);
    alive_.assign(m, 0);
    childs_.resize(m);
    bedges_.resize(m);
    mybest_.resize(m);
    mybest_valid_.assign(m, 0);
    for (int b = m - 1; b >= n_; --b) unused_.push_back(b);
    allow_stamp_.assign(static_cast<size_t>(n_) * n_, 0);
    stamp_ = 0;
  }

  void solve() {
    if (n_ == 0) return;
    while (true) {  // stages
      std::fill(label_.begin(), label_.end(), 0);
      std::fill(labeledge_v_.begin(), labeledge_v_.end(), kNone);
      std::fill(bestedge_v_.begin(), bestedge_v_.end(), kNone);
      for (int b = n_; b < 2 * n_; ++b) mybest_valid_[b] = 0;
      ++stamp_;  // invalidates allowedge
      queue_.clear();

      for (int v = 0; v < n_; ++v)
        if (mate_[v] == kNone && label_[inblossom_[v]] == 0)
          assignLabel(v, 1, kNone);

      bool augmented = false;
      while (true) {  // substages
        while (!queue_.empty() && !augmented) {
          int v = queue_.back();
          queue_.pop_back();
          check(label_[inblossom_[v]] == 1, "queued vertex not S");
          for (int w : neighbors_[v]) {
            if (w == v) continue;
            int bv = inblossom_[v];
            int bw = inblossom_[w];
            if (bv == bw) continue;  // intra-blossom edge
            int64_t kslack = 0;
            if (!allowed(v, w)) {
              kslack = slack(v, w);
              if (kslack <= 0) allow(v, w);
            }
            if (allowed(v, w)) {
              if (label_[bw] == 0) {
                assignLabel(w, 2, v);
              } else if (label_[bw] == 1) {
                int base = scanBlossom(v, w);
                if (base != kNoNode) {
                  addBlossom(base, v, w);
                } else {
                  augmentMatching(v, w);
                  augmented = true;
                  break;
                }
              } else if (label_[w] == 0) {
                check(label_[bw] == 2, "expected T-blossom");
                label_[w] = 2;
                labeledge_v_[w] = v;
                labeledge_w_[w] = w;
              }
            } else if (label_[bw] == 1) {
              if (bestedge_v_[bv] == kNone ||
                  kslack < slack(bestedge_v_[bv], bestedge_w_[bv])) {
                bestedge_v_[bv] = v;
                bestedge_w_[bv] = w;
              }
            } else if (label_[w] == 0) {
              if (bestedge_v_[w] == kNone ||
                  kslack < slack(bestedge_v_[w], bestedge_w_[w])) {
                bestedge_v_[w] = v;
                bestedge_w_[w] = w;
              }
            }
          }
        }
        if (augmented) break;

        // Dual update: find the binding constraint.
        int deltatype = -1;
        int64_t delta = 0;
        int deltaedge_v = kNone, deltaedge_w = kNone, deltablossom = kNone;

        if (!maxcard_) {
          deltatype = 1;
          delta = *std::min_element(dualvar_.begin(), dualvar_.end());
        }
        for (int v = 0; v < n_; ++v) {
          if (label_[inblossom_[v]] == 0 && bestedge_v_[v] != kNone) {
            int64_t d = slack(bestedge_v_[v], bestedge_w_[v]);
            if (deltatype == -1 || d < delta) {
              delta = d;
              deltatype = 2;
              deltaedge_v = bestedge_v_[v];
              deltaedge_w = bestedge_w_[v];
            }
          }
        }
        for (int b = 0; b < 2 * n_; ++b) {
          if (!existsNode(b)) continue;
          if (blossomparent_[b] == kNone && label_[b] == 1 &&
              bestedge_v_[b] != kNone) {
            int64_t kslack = slack(bestedge_v_[b], bestedge_w_[b]);
            check(kslack % 2 == 0, "odd S-S slack");
            int64_t d = kslack / 2;
            if (deltatype == -1 || d < delta) {
              delta = d;
              deltatype = 3;
              deltaedge_v = bestedge_v_[b];
              deltaedge_w = bestedge_w_[b];
            }
          }
        }
        for (int b = n_; b < 2 * n_; ++b) {
          if (alive_[b] && blossomparent_[b] == kNone && label_[b] == 2 &&
              (deltatype == -1 || blossomdual_[b] < delta)) {
            delta = blossomdual_[b];
            deltatype = 4;
            deltablossom = b;
          }
        }
        if (deltatype == -1) {
          check(maxcard_, "stuck dual update without maxcardinality");
          deltatype = 1;
          delta = std::max<int64_t>(
              0, *std::min_element(dualvar_.begin(), dualvar_.end()));
        }

        for (int v = 0; v < n_; ++v) {
          int lbl = label_[inblossom_[v]];
          if (lbl == 1)
            dualvar_[v] -= delta;
          else if (lbl == 2)
            dualvar_[v] += delta;
        }
        for (int b = n_; b < 2 * n_; ++b) {
          if (alive_[b] && blossomparent_[b] == kNone) {
            if (label_[b] == 1)
              blossomdual_[b] += delta;
            else if (label_[b] == 2)
              blossomdual_[b] -= delta;
          }
        }

        if (deltatype == 1) {
          break;  // optimum reached
        } else if (deltatype == 2) {
          allow(deltaedge_v, deltaedge_w);
          queue_.push_back(deltaedge_v);
        } else if (deltatype == 3) {
          allow(deltaedge_v, deltaedge_w);
          check(label_[inblossom_[deltaedge_v]] == 1, "delta3 edge not from S");
          queue_.push_back(deltaedge_v);
        } else {
          expandBlossom(deltablossom, false);
        }
      }

      for (int v = 0; v < n_; ++v)
        if (mate_[v] != kNone)
          check(mate_[mate_[v]] == v, "asymmetric matching");
      if (!augmented) break;

      for (int b = n_; b < 2 * n_; ++b)
        if (alive_[b] && blossomparent_[b] == kNone && label_[b] == 1 &&
            blossomdual_[b] == 0)
          expandBlossom(b, true);
    }
  }

  // Check the complementary-slackness certificate of optimality.
  void verifyOptimum() const {
    int64_t vdualoffset = 0;
    int64_t mindual = *std::min_element(dualvar_.begin(), dualvar_.end());
    if (maxcard_) vdualoffset = std::max<int64_t>(0, -mindual);
    check(mindual + vdualoffset >= 0, "negative vertex dual");
    for (int b = n_; b < 2 * n_; ++b)
      if (alive_[b]) check(blossomdual_[b] >= 0, "negative blossom dual");
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        if (!has_edge_[idx(i, j)]) continue;
        int64_t s = dualvar_[i] + dualvar_[j] - 2 * wmat_[idx(i, j)];
        vector<int> ib{i}, jb{j};
        while (blossomparent_[ib.back()] != kNone)
          ib.push_back(blossomparent_[ib.back()]);
        while (blossomparent_[jb.back()] != kNone)
          jb.push_back(blossomparent_[jb.back()]);
        std::reverse(ib.begin(), ib.end());
        std::reverse(jb.begin(), jb.end());
        for (size_t k = 0; k < std::min(ib.size(), jb.size()); ++k) {
          if (ib[k] != jb[k]) break;
          s += 2 * blossomdual_[ib[k]];
        }
        check(s >= 0, "negative slack");
        if (mate_[i] == j || mate_[j] == i) {
          check(mate_[i] == j && mate_[j] == i, "asymmetric matched pair");
          check(s == 0, "matched edge with nonzero slack");
        }
      }
    }
    for (int v = 0; v < n_; ++v)
      check(mate_[v] != kNone || dualvar_[v] + vdualoffset == 0,
            "single vertex with nonzero dual");
    for (int b = n_; b < 2 * n_; ++b) {
      if (!alive_[b] || blossomdual_[b] <= 0) continue;
      check(bedges_[b].size() % 2 == 1, "full blossom with even edge count");
      for (size_t k = 1; k < bedges_[b].size(); k += 2) {
        check(mate_[bedges_[b][k].first] == bedges_[b][k].second,
              "blossom edge unmatched");
        check(mate_[bedges_[b][k].second] == bedges_[b][k].first,
              "blossom edge unmatched");
      }
    }
  }

  const vector<int>& mate() const { return mate_; }

 private:
  using VW = std::pair<int, int>;

  size_t idx(int v, int w) const {
    return static_cast<size_t>(v) * n_ + w;
  }
  bool allowed(int v, int w) const { return allow_stamp_[idx(v, w)] == stamp_; }
  void allow(int v, int w) {
    allow_stamp_[idx(v, w)] = stamp_;
    allow_stamp_[idx(w, v)] = stamp_;
  }
  static void check(bool ok, const char* msg) {
    if (!ok) throw std::runtime_error(std::string("matching invariant: ") + msg);
  }
  bool isBlossom(int b) const { return b >= n_; }
  bool existsNode(int b) const { return b < n_ || alive_[b]; }

  int64_t slack(int v, int w) const {
    return dualvar_[v] + dualvar_[w] - 2 * wmat_[idx(v, w)];
  }

  // Collect the leaf vertices of (sub-)blossom b.
  void leaves(int b, vector<int>& out) const {
    if (!isBlossom(b)) {
      out.push_back(b);
      return;
    }
    for (int c : childs_[b]) leaves(c, out);
  }

  void assignLabel(int w, int t, int v) {
    int b = inblossom_[w];
    check(label_[w] == 0 && label_[b] == 0, "relabeling a labeled node");
    label_[w] = label_[b] = t;
    if (v != kNone) {
      labeledge_v_[w] = labeledge_v_[b] = v;
      labeledge_w_[w] = labeledge_w_[b] = w;
    } else {
      labeledge_v_[w] = labeledge_v_[b] = kNone;
      labeledge_w_[w] = labeledge_w_[b] = kNone;
    }
    bestedge_v_[w] = bestedge_v_[b] = kNone;
    if (t == 1) {
      scratch_.clear();
      leaves(b, scratch_);
      queue_.insert(queue_.end(), scratch_.begin(), scratch_.end());
    } else if (t == 2) {
      int base = blossombase_[b];
      check(mate_[base] != kNone, "T-blossom with single base");
      assignLabel(mate_[base], 1, base);
    }
  }

  int scanBlossom(int v, int w) {
    vector<int> path;
    int base = kNoNode;
    while (v != kNoNode) {
      int b = inblossom_[v];
      if (label_[b] & 4) {
        base = blossombase_[b];
        break;
      }
      check(label_[b] == 1, "scan met non-S blossom");
      path.push_back(b);
      label_[b] = 5;
      if (labeledge_v_[b] == kNone) {
        check(mate_[blossombase_[b]] == kNone, "inconsistent single base");
        v = kNoNode;
      } else {
        check(labeledge_v_[b] == mate_[blossombase_[b]], "labeledge mismatch");
        v = labeledge_v_[b];
        b = inblossom_[v];
        check(label_[b] == 2, "expected T-blossom in scan");
        v = labeledge_v_[b];
      }
      if (w != kNoNode) std::swap(v, w);
    }
    for (int b : path) label_[b] = 1;
    return base;
  }

  // Python-style wrap-around access into the child/edge rings.
  int childAt(int b, long j) const {
    long m = static_cast<long>(childs_[b].size());
    return childs_[b][static_cast<size_t>(((j % m) + m) % m)];
  }
  VW edgeAt(int b, long j) const {
    long m = static_cast<long>(bedges_[b].size());
    return bedges_[b][static_cast<size_t>(((j % m) + m) % m)];
  }

  void addBlossom(int base, int v, int w) {
    int bb = inblossom_[base];
    int bv = inblossom_[v];
    int bw = inblossom_[w];
    check(!unused_.empty(), "blossom pool exhausted");
    int b = unused_.back();
    unused_.pop_back();
    alive_[b] = 1;
    blossombase_[b] = base;
    blossomparent_[b] = kNone;
    blossomparent_[bb] = b;
    childs_[b].clear();
    bedges_[b].clear();
    bedges_[b].emplace_back(v, w);
    while (bv != bb) {
      blossomparent_[bv] = b;
      childs_[b].push_back(bv);
      bedges_[b].emplace_back(labeledge_v_[bv], labeledge_w_[bv]);
      check(label_[bv] == 2 ||
                (label_[bv] == 1 && labeledge_v_[bv] == mate_[blossombase_[bv]]),
            "bad label while tracing blossom");
      v = labeledge_v_[bv];
      bv = inblossom_[v];
    }
    childs_[b].push_back(bb);
    std::reverse(childs_[b].begin(), childs_[b].end());
    std::reverse(bedges_[b].begin(), bedges_[b].end());
    while (bw != bb) {
      blossomparent_[bw] = b;
      childs_[b].push_back(bw);
      bedges_[b].emplace_back(labeledge_w_[bw], labeledge_v_[bw]);
      check(label_[bw] == 2 ||
                (label_[bw] == 1 && labeledge_v_[bw] == mate_[blossombase_[bw]]),
            "bad label while tracing blossom");
      w = labeledge_v_[bw];
      bw = inblossom_[w];
    }
    check(label_[bb] == 1, "blossom base not S");
    label_[b] = 1;
    labeledge_v_[b] = labeledge_v_[bb];
    labeledge_w_[b] = labeledge_w_[bb];
    blossomdual_[b] = 0;
    scratch_.clear();
    leaves(b, scratch_);
    for (int lv : scratch_) {
      if (label_[inblossom_[lv]] == 2) queue_.push_back(lv);
      inblossom_[lv] = b;
    }
    // Least-slack edges from this blossom to every neighboring S-blossom.
    vector<VW> bestedgeto(static_cast<size_t>(2) * n_, VW(kNone, kNone));
    for (int child : childs_[b]) {
      vector<VW> nblist;
      if (isBlossom(child)) {
        if (mybest_valid_[child]) {
          nblist = mybest_[child];
          mybest_valid_[child] = 0;
        } else {
          scratch_.clear();
          leaves(child, scratch_);
          for (int lv : scratch_)
            for (int nw : neighbors_[lv])
              if (lv != nw) nblist.emplace_back(lv, nw);
        }
      } else {
        for (int nw : neighbors_[child])
          if (child != nw) nblist.emplace_back(child, nw);
      }
      for (VW k : nblist) {
        int i = k.first, j = k.second;
        if (inblossom_[j] == b) std::swap(i, j);
        int bj = inblossom_[j];
        if (bj != b && label_[bj] == 1 &&
            (bestedgeto[bj].first == kNone ||
             slack(i, j) < slack(bestedgeto[bj].first, bestedgeto[bj].second)))
          bestedgeto[bj] = VW(i, j);
      }
      bestedge_v_[child] = kNone;
    }
    mybest_[b].clear();
    for (const VW& k : bestedgeto)
      if (k.first != kNone) mybest_[b].push_back(k);
    mybest_valid_[b] = 1;
    bestedge_v_[b] = kNone;
    int64_t mybestslack = 0;
    for (const VW& k : mybest_[b]) {
      int64_t ks = slack(k.first, k.second);
      if (bestedge_v_[b] == kNone || ks < mybestslack) {
        bestedge_v_[b] = k.first;
        bestedge_w_[b] = k.second;
        mybestslack = ks;
      }
    }
  }

  void expandBlossom(int b, bool endstage) {
    for (int s : childs_[b]) {
      blossomparent_[s] = kNone;
      if (isBlossom(s)) {
        if (endstage && blossomdual_[s] == 0) {
          expandBlossom(s, endstage);
        } else {
          scratch_.clear();
          leaves(s, scratch_);
          for (int lv : scratch_) inblossom_[lv] = s;
        }
      } else {
        inblossom_[s] = s;
      }
    }
    if (!endstage && label_[b] == 2) {
      int entrychild = inblossom_[labeledge_w_[b]];
      long m = static_cast<long>(childs_[b].size());
      long j = 0;
      for (long t = 0; t < m; ++t)
        if (childs_[b][static_cast<size_t>(t)] == entrychild) {
          j = t;
          break;
        }
      long jstep;
      if (j & 1) {
        j -= m;
        jstep = 1;
      } else {
        jstep = -1;
      }
      int v = labeledge_v_[b], w = labeledge_w_[b];
      while (j != 0) {
        int p, q;
        if (jstep == 1) {
          VW e = edgeAt(b, j);
          p = e.first;
          q = e.second;
        } else {
          VW e = edgeAt(b, j - 1);
          q = e.first;
          p = e.second;
        }
        label_[w] = 0;
        label_[q] = 0;
        assignLabel(w, 2, v);
        allow(p, q);
        j += jstep;
        if (jstep == 1) {
          VW e = edgeAt(b, j);
          v = e.first;
          w = e.second;
        } else {
          VW e = edgeAt(b, j - 1);
          w = e.first;
          v = e.second;
        }
        allow(v, w);
        j += jstep;
      }
      int bw = childAt(b, j);
      label_[w] = label_[bw] = 2;
      labeledge_v_[w] = labeledge_v_[bw] = v;
      labeledge_w_[w] = labeledge_w_[bw] = w;
      bestedge_v_[bw] = kNone;
      j += jstep;
      while (childAt(b, j) != entrychild) {
        int bv = childAt(b, j);
        if (label_[bv] == 1) {
          j += jstep;
          continue;
        }
        int lv = kNone;
        if (isBlossom(bv)) {
          scratch_.clear();
          leaves(bv, scratch_);
          for (int cand : scratch_) {
            lv = cand;
            if (label_[cand] != 0) break;
          }
        } else {
          lv = bv;
        }
        if (lv != kNone && label_[lv] != 0) {
          check(label_[lv] == 2, "expected reached T-vertex");
          check(inblossom_[lv] == bv, "leaf outside its blossom");
          label_[lv] = 0;
          label_[mate_[blossombase_[bv]]] = 0;
          assignLabel(lv, 2, labeledge_v_[lv]);
        }
        j += jstep;
      }
    }
    label_[b] = 0;
    labeledge_v_[b] = labeledge_w_[b] = kNone;
    bestedge_v_[b] = kNone;
    blossomparent_[b] = kNone;
    blossombase_[b] = kNone;
    blossomdual_[b] = 0;
    mybest_valid_[b] = 0;
    alive_[b] = 0;
    unused_.push_back(b);
  }

  void augmentBlossom(int b, int v) {
    int t = v;
    while (blossomparent_[t] != b) t = blossomparent_[t];
    if (isBlossom(t)) augmentBlossom(t, v);
    long m = static_cast<long>(childs_[b].size());
    long i = 0;
    for (long k = 0; k < m; ++k)
      if (childs_[b][static_cast<size_t>(k)] == t) {
        i = k;
        break;
      }
    long j = i, jstep;
    if (i & 1) {
      j -= m;
      jstep = 1;
    } else {
      jstep = -1;
    }
    while (j != 0) {
      j += jstep;
      int ct = childAt(b, j);
      int w, x;
      if (jstep == 1) {
        VW e = edgeAt(b, j);
        w = e.first;
        x = e.second;
      } else {
        VW e = edgeAt(b, j - 1);
        x = e.first;
        w = e.second;
      }
      if (isBlossom(ct)) augmentBlossom(ct, w);
      j += jstep;
      ct = childAt(b, j);
      if (isBlossom(ct)) augmentBlossom(ct, x);
      mate_[w] = x;
      mate_[x] = w;
    }
    std::rotate(childs_[b].begin(), childs_[b].begin() + i, childs_[b].end());
    std::rotate(bedges_[b].begin(), bedges_[b].begin() + i, bedges_[b].end());
    blossombase_[b] = blossombase_[childs_[b][0]];
    check(blossombase_[b] == v, "augmented blossom base mismatch");
  }

  void augmentMatching(int v, int w) {
    int pairs[2][2] = {{v, w}, {w, v}};
    for (auto& pr : pairs) {
      int s = pr[0], j = pr[1];
      while (true) {
        int bs = inblossom_[s];
        check(label_[bs] == 1, "augmenting through non-S blossom");
        check((labeledge_v_[bs] == kNone && mate_[blossombase_[bs]] == kNone) ||
                  labeledge_v_[bs] == mate_[blossombase_[bs]],
              "augment trace inconsistency");
        if (isBlossom(bs)) augmentBlossom(bs, s);
        mate_[s] = j;
        if (labeledge_v_[bs] == kNone) break;
        int t = labeledge_v_[bs];
        int bt = inblossom_[t];
        check(label_[bt] == 2, "expected T-blossom on trace");
        s = labeledge_v_[bt];
        j = labeledge_w_[bt];
        check(blossombase_[bt] == t, "trace base mismatch");
        if (isBlossom(bt)) augmentBlossom(bt, j);
        mate_[j] = s;
      }
    }
  }

  int n_;
  bool maxcard_;
  int64_t maxweight_;
  vector<int64_t> wmat_;
  vector<char> has_edge_;
  vector<vector<int>> neighbors_;
  vector<int> mate_;
  vector<int> label_;
  vector<int> labeledge_v_, labeledge_w_;
  vector<int> inblossom_;
  vector<int> blossomparent_;
  vector<int> blossombase_;
  vector<int> bestedge_v_, bestedge_w_;
  vector<int64_t> dualvar_;
  vector<int64_t> blossomdual_;
  vector<char> alive_;
  vector<vector<int>> childs_;
  vector<vector<VW>> bedges_;
  vector<vector<VW>> mybest_;
  vector<char> mybest_valid_;
  vector<int> unused_;
  vector<int> queue_;
  vector<int> scratch_;
  vector<int> allow_stamp_;
  int stamp_;
};

vector<int> solveEdges(int n, const vector<Edge>& edges, bool maxcardinality,
                       bool verify) {
  Matcher m(n, edges, maxcardinality);
  m.solve();
  if (verify) m.verifyOptimum();
  return m.mate();
}

}  // namespace

// Minimum-weight perfect matching of a dense symmetric distance matrix.
// Distances are offset to non-negative maximising weights and quantised onto
// an int64 grid (relative resolution ~2^-40) so the blossom arithmetic stays
// exact.  Returns 0 on success, negative error codes otherwise.
extern "C" __attribute__((visibility("default"))) int64_t
wmatch_solve_dense(int64_t n, int64_t dmat_addr,
                                      int64_t mate_addr) {
  const double* dmat = reinterpret_cast<const double*>(dmat_addr);
  int32_t* mate = reinterpret_cast<int32_t*>(mate_addr);
  if (n < 0 || (n % 2) != 0) return -1;
  if (n == 0) return 0;
  double maxd = 0.0;
  for (int64_t i = 0; i < n * n; ++i) {
    if (!std::isfinite(dmat[i]) || dmat[i] < 0) return -2;
    maxd = std::max(maxd, dmat[i]);
  }
  const double scale =
      maxd > 0 ? static_cast<double>(int64_t(1) << 40) / maxd : 1.0;
  vector<Edge> edges;
  edges.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = dmat[static_cast<size_t>(i) * n + j];
      int64_t w = llround((maxd - d) * scale);
      edges.push_back(Edge{i, j, w});
    }
  try {
    vector<int> result = solveEdges(static_cast<int>(n), edges, true, false);
    for (int i = 0; i < n; ++i) {
      if (result[i] < 0) return -3;  // complete even graph must match fully
      mate[i] = result[i];
    }
  } catch (const std::exception&) {
    return -4;
  }
  return 0;
}

namespace py = pybind11;

static py::array_t<int32_t> py_max_weight_matching(
    py::array_t<int64_t, py::array::c_style | py::array::forcecast> ii,
    py::array_t<int64_t, py::array::c_style | py::array::forcecast> jj,
    py::array_t<int64_t, py::array::c_style | py::array::forcecast> ww, int n,
    bool maxcardinality, bool verify) {
  if (ii.size() != jj.size() || ii.size() != ww.size())
    throw std::invalid_argument("edge arrays must have equal length");
  vector<Edge> edges(static_cast<size_t>(ii.size()));
  auto i_ = ii.unchecked<1>();
  auto j_ = jj.unchecked<1>();
  auto w_ = ww.unchecked<1>();
  for (py::ssize_t k = 0; k < ii.size(); ++k)
    edges[static_cast<size_t>(k)] =
        Edge{static_cast<int>(i_(k)), static_cast<int>(j_(k)), w_(k)};
  vector<int> mate = solveEdges(n, edges, maxcardinality, verify);
  py::array_t<int32_t> out(n);
  auto o = out.mutable_unchecked<1>();
  for (int v = 0; v < n; ++v) o(v) = mate[v];
  return out;
}

static py::array_t<int32_t> py_min_weight_perfect_matching(
    py::array_t<double, py::array::c_style | py::array::forcecast> dmat) {
  if (dmat.ndim() != 2 || dmat.shape(0) != dmat.shape(1))
    throw std::invalid_argument("distance matrix must be square");
  int64_t n = dmat.shape(0);
  py::array_t<int32_t> out(n);
  if (n == 0) return out;
  int64_t rc = wmatch_solve_dense(
      n, reinterpret_cast<int64_t>(dmat.data()),
      reinterpret_cast<int64_t>(out.mutable_data()));
  if (rc != 0)
    throw std::runtime_error("dense matching failed with code " +
                             std::to_string(rc));
  return out;
}

PYBIND11_MODULE(_wmatch, m) {
  m.doc() = "Exact blossom matching (int64 duals) with a dense min-weight entry";
  m.def("max_weight_matching", &py_max_weight_matching, py::arg("ii"),
        py::arg("jj"), py::arg("ww"), py::arg("n"),
        py::arg("maxcardinality") = false, py::arg("verify") = true,
        "Maximum-weight matching of an integer-weighted edge list; returns "
        "the mate array (-1 for unmatched).");
  m.def("min_weight_perfect_matching", &py_min_weight_perfect_matching,
        py::arg("dmat"),
        "Minimum-weight perfect matching of a dense symmetric distance "
        "matrix; returns the mate array.");
}
