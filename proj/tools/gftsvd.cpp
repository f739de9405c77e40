#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gft/commands.hpp"

namespace {

using namespace gft::cli;

void add_framing(CLI::App* sub, FramingOptions& f) {
    sub->add_option("--win-ms", f.win_ms, "window length in ms")->capture_default_str();
    sub->add_option("--hop-ms", f.hop_ms, "hop size in ms")->capture_default_str();
    sub->add_option("--sample-rate", f.sample_rate, "expected sample rate in Hz")->capture_default_str();
}

void add_clip(CLI::App* sub, std::optional<double>& clip, bool& no_clip) {
    sub->add_option("--clip", clip, "symmetric mask clip bound")->default_str("2");
    sub->add_flag("--no-clip", no_clip, "leave the oracle mask unbounded");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Real-valued graph Fourier transform (GFT-SVD) speech enhancement toolkit"};
    app.require_subcommand(1);

    BasisOptions basis;
    auto* basis_cmd = app.add_subcommand("basis", "compute and save the canonical SVD basis of A_k");
    basis_cmd->add_option("--n", basis.n, "transform length")->capture_default_str();
    basis_cmd->add_option("--k", basis.k, "neighbour count")->capture_default_str();
    basis_cmd->add_option("--out", basis.out, "basis file")->required();

    EnhanceOptions enh;
    std::string enh_mode = "oracle";
    bool enh_no_clip = false;
    bool enh_pcm16 = false;
    auto* enh_cmd = app.add_subcommand("enhance", "mask a noisy WAV in the GFT-SVD domain");
    enh_cmd->add_option("noisy", enh.noisy, "noisy input WAV")->required();
    enh_cmd->add_option("--basis", enh.basis, "basis file")->required();
    enh_cmd->add_option("--mode", enh_mode, "oracle, model or unity")
        ->check(CLI::IsMember({"oracle", "model", "unity"}))
        ->capture_default_str();
    enh_cmd->add_option("--clean", enh.clean, "clean reference (oracle mask and metrics)");
    enh_cmd->add_option("--model", enh.model, "checkpoint for model mode");
    enh_cmd->add_option("--out", enh.out, "enhanced output WAV")->required();
    enh_cmd->add_option("--metrics", enh.metrics_out, "metrics CSV (default: stdout)");
    enh_cmd->add_option("--n", enh.n, "transform length (must match the basis)");
    enh_cmd->add_flag("--pcm16", enh_pcm16, "write 16-bit PCM instead of float32");
    add_clip(enh_cmd, enh.clip, enh_no_clip);
    add_framing(enh_cmd, enh.framing);

    CompareOptions cmp;
    bool cmp_no_clip = false;
    auto* cmp_cmd = app.add_subcommand("compare", "oracle-mask sweep over transforms and k");
    cmp_cmd->add_option("--manifest", cmp.manifest, "manifest CSV")->required();
    cmp_cmd->add_option("--basis", cmp.basis_dir, "directory holding basis_n<N>_k<K>.gftb files")->required();
    cmp_cmd->add_option("--k", cmp.k_list, "neighbour counts")->delimiter(',')->capture_default_str();
    cmp_cmd->add_option("--transform", cmp.transforms, "transforms")
        ->delimiter(',')
        ->check(CLI::IsMember({"gft-svd", "gft-evd", "stft"}))
        ->capture_default_str();
    cmp_cmd->add_option("--n", cmp.n, "transform length")->capture_default_str();
    cmp_cmd->add_option("--seed", cmp.seed, "mixing seed")->capture_default_str();
    cmp_cmd->add_option("--out", cmp.out, "comparison CSV")->required();
    add_clip(cmp_cmd, cmp.clip, cmp_no_clip);
    add_framing(cmp_cmd, cmp.framing);

    RenderOptions rnd;
    bool rnd_no_clip = false;
    auto* rnd_cmd = app.add_subcommand("render", "export a spectrogram as CSV and PGM heatmap");
    rnd_cmd->add_option("input", rnd.input, "input WAV")->required();
    rnd_cmd->add_option("--basis", rnd.basis, "basis file (gft-svd)");
    rnd_cmd->add_option("--clean", rnd.clean, "clean reference; also renders the oracle mask");
    rnd_cmd->add_option("--transform", rnd.transform, "gft-svd, gft-evd or stft")
        ->check(CLI::IsMember({"gft-svd", "gft-evd", "stft"}))
        ->capture_default_str();
    rnd_cmd->add_option("--n", rnd.n, "transform length");
    rnd_cmd->add_option("--k", rnd.k, "neighbour count for gft-evd without a basis")->capture_default_str();
    rnd_cmd->add_option("--out", rnd.out, "output prefix")->required();
    add_clip(rnd_cmd, rnd.clip, rnd_no_clip);
    add_framing(rnd_cmd, rnd.framing);

    TrainOptions trn;
    auto* trn_cmd = app.add_subcommand("train", "train the MLP mask estimator on SI-SDR");
    trn_cmd->add_option("--manifest", trn.manifest, "manifest CSV")->required();
    trn_cmd->add_option("--basis", trn.basis, "basis file")->required();
    trn_cmd->add_option("--out", trn.out, "checkpoint file")->required();
    trn_cmd->add_option("--loss-csv", trn.loss_csv, "per-step loss CSV (default: <out>.loss.csv)");
    trn_cmd->add_option("--n", trn.n, "transform length (must match the basis)");
    trn_cmd->add_option("--hidden", trn.hidden, "hidden layer width")->capture_default_str();
    trn_cmd->add_option("--steps", trn.train.steps, "optimizer steps")->capture_default_str();
    trn_cmd->add_option("--lr", trn.train.learning_rate, "learning rate")->capture_default_str();
    trn_cmd->add_option("--batch", trn.train.batch_size, "utterances per step")->capture_default_str();
    trn_cmd->add_option("--seed", trn.train.seed, "initialization and mixing seed")->capture_default_str();
    add_framing(trn_cmd, trn.framing);

    SynthOptions syn;
    auto* syn_cmd = app.add_subcommand("synth", "generate synthetic clean/noise fixtures and a manifest");
    syn_cmd->add_option("--out", syn.out_dir, "output directory")->required();
    syn_cmd->add_option("--count", syn.count, "number of pairs")->capture_default_str();
    syn_cmd->add_option("--seconds", syn.seconds, "clean clip length")->capture_default_str();
    syn_cmd->add_option("--noise-seconds", syn.noise_seconds, "noise clip length")->capture_default_str();
    syn_cmd->add_option("--snr", syn.snr_db, "manifest SNR in dB")->capture_default_str();
    syn_cmd->add_option("--gain", syn.gain, "gain applied to the clean clips")->capture_default_str();
    syn_cmd->add_option("--seed", syn.seed, "generator seed")->capture_default_str();
    syn_cmd->add_option("--sample-rate", syn.sample_rate, "sample rate in Hz")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*basis_cmd) return cmd_basis(basis, std::cout);
        if (*enh_cmd) {
            enh.mode = enh_mode == "model" ? EnhanceMode::model
                       : enh_mode == "unity" ? EnhanceMode::unity
                                             : EnhanceMode::oracle;
            if (enh_no_clip) enh.clip.reset();
            if (enh_pcm16) enh.encoding = gft::WavEncoding::pcm16;
            return cmd_enhance(enh, std::cout);
        }
        if (*cmp_cmd) {
            if (cmp_no_clip) cmp.clip.reset();
            return cmd_compare(cmp, std::cout);
        }
        if (*rnd_cmd) {
            if (rnd_no_clip) rnd.clip.reset();
            return cmd_render(rnd, std::cout);
        }
        if (*trn_cmd) return cmd_train(trn, std::cout);
        if (*syn_cmd) return cmd_synth(syn, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitUsage;
}
