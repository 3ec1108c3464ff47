#pragma once

// Generic block-diagram interconnection. Subsystems are stacked block-diagonal
// and every subsystem input is expressed as a weighted sum of subsystem
// outputs and external inputs; external outputs likewise. The algebraic loop
// is solved once, in state space.

#include <vector>

#include "statespace.hpp"

namespace invctl {

class Network {
  public:
    struct OutputRef {
        int sys;
        Eigen::Index port;
    };

    int add(StateSpace sys) {
        subsystems_.push_back(std::move(sys));
        return static_cast<int>(subsystems_.size()) - 1;
    }

    void set_external_inputs(Eigen::Index n) { n_ext_ = n; }

    /// input `port` of subsystem `sys` += gain * (output of another subsystem)
    void connect(int sys, Eigen::Index port, OutputRef src, double gain = 1.0) {
        wires_.push_back({sys, port, src, gain});
    }

    /// input `port` of subsystem `sys` += gain * external input `ext`
    void connect_input(int sys, Eigen::Index port, Eigen::Index ext, double gain = 1.0) {
        ext_wires_.push_back({sys, port, ext, gain});
    }

    /// append an external output: gain * subsystem output
    void add_output(OutputRef src, double gain = 1.0) {
        outputs_.push_back({src, gain, -1, 0.0});
    }

    /// append an external output: gain * subsystem output + fgain * external input
    void add_output_mixed(OutputRef src, double gain, Eigen::Index ext, double fgain) {
        outputs_.push_back({src, gain, ext, fgain});
    }

    StateSpace build() const {
        StateSpace all;
        bool first = true;
        std::vector<Eigen::Index> in_off(subsystems_.size()), out_off(subsystems_.size());
        Eigen::Index in_acc = 0, out_acc = 0;
        for (std::size_t i = 0; i < subsystems_.size(); ++i) {
            in_off[i] = in_acc;
            out_off[i] = out_acc;
            in_acc += subsystems_[i].ninputs();
            out_acc += subsystems_[i].noutputs();
            all = first ? subsystems_[i] : append(all, subsystems_[i]);
            first = false;
        }
        const Eigen::Index nv = in_acc, no = out_acc;
        Matrix S = Matrix::Zero(nv, no);       // v = S o + T w
        Matrix T = Matrix::Zero(nv, n_ext_);
        for (const Wire& w : wires_)
            S(in_off[static_cast<std::size_t>(w.sys)] + w.port,
              out_off[static_cast<std::size_t>(w.src.sys)] + w.src.port) += w.gain;
        for (const ExtWire& w : ext_wires_)
            T(in_off[static_cast<std::size_t>(w.sys)] + w.port, w.ext) += w.gain;

        Matrix E = Matrix::Identity(nv, nv) - S * all.D;
        Eigen::FullPivLU<Matrix> lu(E);
        lu.setThreshold(kLoopTol);
        if (!lu.isInvertible()) throw IllPosedLoop("Network: singular algebraic loop");
        const Matrix Ei = lu.inverse();
        // v = Ei (S C x + T w)
        const Matrix A = all.A + all.B * Ei * S * all.C;
        const Matrix B = all.B * Ei * T;
        const Matrix Co = all.C + all.D * Ei * S * all.C; // full output vector o
        const Matrix Do = all.D * Ei * T;

        const Eigen::Index nz = static_cast<Eigen::Index>(outputs_.size());
        Matrix Cz = Matrix::Zero(nz, all.order());
        Matrix Dz = Matrix::Zero(nz, n_ext_);
        for (Eigen::Index i = 0; i < nz; ++i) {
            const ExtOutput& eo = outputs_[static_cast<std::size_t>(i)];
            const Eigen::Index row =
                out_off[static_cast<std::size_t>(eo.src.sys)] + eo.src.port;
            Cz.row(i) = eo.gain * Co.row(row);
            Dz.row(i) = eo.gain * Do.row(row);
            if (eo.ext >= 0) Dz(i, eo.ext) += eo.fgain;
        }
        if (all.order() == 0) return StateSpace::gain(Dz);
        return StateSpace(A, B, Cz, Dz, all.dt);
    }

  private:
    struct Wire {
        int sys;
        Eigen::Index port;
        OutputRef src;
        double gain;
    };
    struct ExtWire {
        int sys;
        Eigen::Index port;
        Eigen::Index ext;
        double gain;
    };
    struct ExtOutput {
        OutputRef src;
        double gain;
        Eigen::Index ext; // -1 when no feedthrough term
        double fgain;
    };

    std::vector<StateSpace> subsystems_;
    std::vector<Wire> wires_;
    std::vector<ExtWire> ext_wires_;
    std::vector<ExtOutput> outputs_;
    Eigen::Index n_ext_ = 0;
};

} // namespace invctl
