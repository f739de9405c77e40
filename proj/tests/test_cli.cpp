#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "gft/commands.hpp"
#include "test_support.hpp"

using namespace gft;
using namespace gft::cli;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

/// Short clips, a 64-point basis and a 3 ms / 0.75 ms framing shared by every test.
class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir = new test::TempDir;
        std::ostringstream log;
        SynthOptions s;
        s.out_dir = dir->file("data");
        s.count = 2;
        s.seconds = 0.1;
        s.noise_seconds = 0.15;
        s.seed = 5;
        cmd_synth(s, log);
        for (std::size_t k : {1, 3}) {
            BasisOptions b;
            b.n = 64;
            b.k = k;
            b.out = dir->file(basis_file_name(64, k));
            cmd_basis(b, log);
        }
        const auto entries = load_manifest(dir->file("data/manifest.csv"));
        const auto m = mix_entry(entries[0], 0, 0, 16000);
        write_wav(dir->file("noisy.wav"), AudioClip{m.noisy, 16000});
        write_wav(dir->file("clean.wav"), AudioClip{m.clean, 16000});
    }
    static void TearDownTestSuite() { delete dir; }

    static FramingOptions framing() { return FramingOptions{3.0, 0.75, 16000}; }
    static std::string basis3() { return dir->file(basis_file_name(64, 3)); }

    static test::TempDir* dir;
};

test::TempDir* Cli::dir = nullptr;

}  // namespace

TEST_F(Cli, BasisIsDeterministicAndReportsUnitSpectrum) {
    test::TempDir out;
    std::ostringstream log;
    BasisOptions b;
    b.n = 64;
    b.k = 3;
    b.out = out.file("again.gftb");
    EXPECT_EQ(cmd_basis(b, log), kExitOk);
    EXPECT_EQ(slurp(b.out), slurp(basis3()));

    std::ostringstream log1;
    b.k = 1;
    b.out = out.file("k1.gftb");
    cmd_basis(b, log1);
    EXPECT_NE(log1.str().find("all singular values equal 1"), std::string::npos);
    EXPECT_EQ(log.str().find("all singular values equal 1"), std::string::npos);
    EXPECT_NE(log.str().find("fingerprint "), std::string::npos);
}

TEST_F(Cli, BasisRejectsInvalidGraph) {
    test::TempDir out;
    std::ostringstream log;
    BasisOptions b;
    b.n = 4;
    b.k = 4;
    b.out = out.file("bad.gftb");
    try {
        cmd_basis(b, log);
        FAIL() << "expected ParameterError";
    } catch (const ParameterError& e) {
        EXPECT_EQ(exit_code_for(e), kExitUsage);
    }
}

TEST_F(Cli, EnhanceOracleImprovesAndWritesMetrics) {
    test::TempDir out;
    std::ostringstream log;
    EnhanceOptions o;
    o.noisy = dir->file("noisy.wav");
    o.clean = dir->file("clean.wav");
    o.basis = basis3();
    o.out = out.file("enh.wav");
    o.metrics_out = out.file("m.csv");
    o.framing = framing();
    EXPECT_EQ(cmd_enhance(o, log), kExitOk);
    const auto enhanced = read_wav(o.out);
    const auto clean = read_wav(o.clean);
    const auto noisy = read_wav(o.noisy);
    ASSERT_EQ(enhanced.samples.size(), noisy.samples.size());
    EXPECT_GT(si_sdr(enhanced.samples, clean.samples), si_sdr(noisy.samples, clean.samples) + 3.0);
    const auto csv = slurp(o.metrics_out);
    EXPECT_EQ(csv.rfind("file,si_sdr_db,si_sdr_imp_db,snr_db,max_abs_err,rel_l2_err\nnoisy.wav,", 0), 0u);
    EXPECT_EQ(count_lines(csv), 3u);
}

TEST_F(Cli, EnhanceUnityPassesInputThrough) {
    test::TempDir out;
    std::ostringstream log;
    EnhanceOptions o;
    o.noisy = dir->file("noisy.wav");
    o.basis = basis3();
    o.mode = EnhanceMode::unity;
    o.out = out.file("u.wav");
    o.framing = framing();
    EXPECT_EQ(cmd_enhance(o, log), kExitOk);
    const auto a = read_wav(o.noisy).samples;
    const auto b = read_wav(o.out).samples;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST_F(Cli, EnhanceOracleWithoutCleanIsUsageError) {
    test::TempDir out;
    std::ostringstream log;
    EnhanceOptions o;
    o.noisy = dir->file("noisy.wav");
    o.basis = basis3();
    o.out = out.file("x.wav");
    o.framing = framing();
    try {
        cmd_enhance(o, log);
        FAIL() << "expected an error";
    } catch (const std::exception& e) {
        EXPECT_EQ(exit_code_for(e), kExitUsage);
    }
}

TEST_F(Cli, ModelTrainedOnOtherBasisIsRejected) {
    test::TempDir out;
    std::ostringstream log;
    TrainOptions t;
    t.manifest = dir->file("data/manifest.csv");
    t.basis = dir->file(basis_file_name(64, 1));
    t.out = out.file("m.gftm");
    t.hidden = 8;
    t.train.steps = 2;
    t.framing = framing();
    ASSERT_EQ(cmd_train(t, log), kExitOk);

    EnhanceOptions o;
    o.noisy = dir->file("noisy.wav");
    o.basis = basis3();
    o.mode = EnhanceMode::model;
    o.model = t.out;
    o.out = out.file("y.wav");
    o.framing = framing();
    try {
        cmd_enhance(o, log);
        FAIL() << "expected BasisMismatchError";
    } catch (const BasisMismatchError& e) {
        EXPECT_EQ(exit_code_for(e), kExitContract);
    }
    EXPECT_FALSE(std::filesystem::exists(o.out));

    o.basis = t.basis;
    EXPECT_EQ(cmd_enhance(o, log), kExitOk);
}

TEST_F(Cli, CompareProducesStableTable) {
    test::TempDir out;
    std::ostringstream log;
    CompareOptions c;
    c.manifest = dir->file("data/manifest.csv");
    c.basis_dir = dir->path().string();
    c.k_list = {1, 3};
    c.n = 64;
    c.out = out.file("cmp.csv");
    c.framing = framing();
    EXPECT_EQ(cmd_compare(c, log), kExitOk);
    const auto first = slurp(c.out);
    EXPECT_EQ(first.rfind("file,transform,k,status,si_sdr_noisy_db,si_sdr_enhanced_db,si_sdr_imp_db\n", 0), 0u);
    // 2 files x 3 transforms x 2 k values, plus one MEAN row per (transform, k).
    EXPECT_EQ(count_lines(first), 1u + 12u + 6u);
    EXPECT_EQ(first.find("failed"), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(c.out + ".timing.csv"));

    EXPECT_EQ(cmd_compare(c, log), kExitOk);
    EXPECT_EQ(slurp(c.out), first);
}

TEST_F(Cli, CompareMarksMissingBasisAsFailed) {
    test::TempDir out;
    std::ostringstream log;
    CompareOptions c;
    c.manifest = dir->file("data/manifest.csv");
    c.basis_dir = dir->path().string();
    c.k_list = {3, 5};
    c.transforms = {"gft-svd"};
    c.n = 64;
    c.out = out.file("cmp.csv");
    c.framing = framing();
    EXPECT_EQ(cmd_compare(c, log), kExitPartial);
    const auto text = slurp(c.out);
    EXPECT_NE(text.find("mix_00,gft-svd,5,failed,,,"), std::string::npos);
    EXPECT_NE(text.find("mix_00,gft-svd,3,ok,"), std::string::npos);
}

TEST(RenderPgm, SilenceIsMidGrayAndLayoutIsBinsUp) {
    const auto zero = render_pgm(Matrix::Zero(3, 5));
    const std::string header = "P5\n3 5\n255\n";
    ASSERT_EQ(zero.size(), header.size() + 15);
    EXPECT_EQ(std::string(zero.begin(), zero.begin() + static_cast<long>(header.size())), header);
    for (std::size_t i = header.size(); i < zero.size(); ++i) EXPECT_EQ(zero[i], 128);

    Matrix m = Matrix::Zero(2, 3);
    m(0, 0) = 1.0;   // frame 0, bin 0: bottom-left
    m(1, 2) = -1.0;  // frame 1, top bin: top-right
    const auto img = render_pgm(m);
    const std::size_t h = std::string("P5\n2 3\n255\n").size();
    EXPECT_EQ(img[h + 2 * 2 + 0], 255);
    EXPECT_EQ(img[h + 0 * 2 + 1], 1);
    EXPECT_EQ(img[h + 1 * 2 + 0], 128);
}

TEST_F(Cli, RenderWritesSpectrogramAndMask) {
    test::TempDir out;
    std::ostringstream log;
    RenderOptions r;
    r.input = dir->file("noisy.wav");
    r.clean = dir->file("clean.wav");
    r.basis = basis3();
    r.out = out.file("s");
    r.framing = framing();
    EXPECT_EQ(cmd_render(r, log), kExitOk);
    const auto frames = frame_count(1600, make_framing(framing(), 64));
    const auto pgm = slurp(out.file("s.pgm"));
    const std::string header = "P5\n" + std::to_string(frames) + " 64\n255\n";
    EXPECT_EQ(pgm.rfind(header, 0), 0u);
    EXPECT_EQ(pgm.size(), header.size() + frames * 64);
    EXPECT_EQ(count_lines(slurp(out.file("s.csv"))), 1 + frames * 64);
    EXPECT_TRUE(std::filesystem::exists(out.file("s_mask.pgm")));

    r.out = out.file("t");
    cmd_render(r, log);
    EXPECT_EQ(slurp(out.file("t.pgm")), pgm);
    EXPECT_EQ(slurp(out.file("t_mask.csv")), slurp(out.file("s_mask.csv")));
}

TEST_F(Cli, RenderComplexKinds) {
    test::TempDir out;
    std::ostringstream log;
    RenderOptions r;
    r.input = dir->file("noisy.wav");
    r.transform = "stft";
    r.n = 64;
    r.out = out.file("f");
    r.framing = framing();
    EXPECT_EQ(cmd_render(r, log), kExitOk);
    EXPECT_EQ(slurp(out.file("f.csv")).rfind("frame,bin,real,imag\n", 0), 0u);
    EXPECT_TRUE(std::filesystem::exists(out.file("f_real.pgm")));
    EXPECT_TRUE(std::filesystem::exists(out.file("f_imag.pgm")));

    r.transform = "gft-evd";
    r.basis = basis3();
    r.n.reset();
    r.out = out.file("g");
    EXPECT_EQ(cmd_render(r, log), kExitOk);
    EXPECT_TRUE(std::filesystem::exists(out.file("g_imag.pgm")));

    r.transform = "wavelet";
    EXPECT_THROW(cmd_render(r, log), ParameterError);
}

TEST_F(Cli, RenderOfSilenceIsUniform) {
    test::TempDir out;
    std::ostringstream log;
    write_wav(out.file("z.wav"), AudioClip{std::vector<double>(800, 0.0), 16000});
    RenderOptions r;
    r.input = out.file("z.wav");
    r.basis = basis3();
    r.out = out.file("z");
    r.framing = framing();
    cmd_render(r, log);
    const auto pgm = slurp(out.file("z.pgm"));
    const auto body = pgm.substr(pgm.size() - frame_count(800, make_framing(framing(), 64)) * 64);
    EXPECT_EQ(body.find_first_not_of('\x80'), std::string::npos);
}

TEST_F(Cli, TrainIsReproducible) {
    test::TempDir out;
    std::ostringstream log;
    TrainOptions t;
    t.manifest = dir->file("data/manifest.csv");
    t.basis = basis3();
    t.out = out.file("a.gftm");
    t.hidden = 16;
    t.train.steps = 10;
    t.train.seed = 3;
    t.framing = framing();
    EXPECT_EQ(cmd_train(t, log), kExitOk);
    const auto loss = slurp(t.out + ".loss.csv");
    EXPECT_EQ(loss.rfind("step,loss\n0,", 0), 0u);
    EXPECT_EQ(count_lines(loss), 11u);

    t.out = out.file("b.gftm");
    cmd_train(t, log);
    EXPECT_EQ(slurp(t.out + ".loss.csv"), loss);
    EXPECT_EQ(slurp(out.file("a.gftm")), slurp(out.file("b.gftm")));
}

TEST_F(Cli, TrainRejectsBadManifest) {
    test::TempDir out;
    {
        std::ofstream f(out.file("bad.csv"));
        f << "id,clean_path,noise_path,snr_db\nx,a.wav,b.wav,zero\n";
    }
    std::ostringstream log;
    TrainOptions t;
    t.manifest = out.file("bad.csv");
    t.basis = basis3();
    t.out = out.file("m.gftm");
    t.framing = framing();
    try {
        cmd_train(t, log);
        FAIL() << "expected ManifestError";
    } catch (const ManifestError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(exit_code_for(e), kExitIo);
    }
}

TEST_F(Cli, SynthWritesManifestAndClips) {
    const auto entries = load_manifest(dir->file("data/manifest.csv"));
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[1].id, "mix_01");
    EXPECT_EQ(read_wav(entries[0].clean_path).samples.size(), 1600u);
    EXPECT_EQ(read_wav(entries[0].noise_path).samples.size(), 2400u);
}

TEST(ExitCodes, Mapping) {
    EXPECT_EQ(exit_code_for(ParameterError("x")), kExitUsage);
    EXPECT_EQ(exit_code_for(DimensionError("x")), kExitUsage);
    EXPECT_EQ(exit_code_for(IoError("x")), kExitIo);
    EXPECT_EQ(exit_code_for(MalformedRiffError("x")), kExitIo);
    EXPECT_EQ(exit_code_for(FingerprintMismatchError("x")), kExitIo);
    EXPECT_EQ(exit_code_for(DecompositionError("x")), kExitNumerical);
    EXPECT_EQ(exit_code_for(NumericalError("x")), kExitNumerical);
    EXPECT_EQ(exit_code_for(BasisMismatchError("x")), kExitContract);
    EXPECT_EQ(exit_code_for(std::runtime_error("x")), kExitIo);
    EXPECT_EQ(parse_transform("gft-evd"), TransformKind::gft_evd);
    EXPECT_THROW(parse_transform("dct"), ParameterError);
    EXPECT_EQ(basis_file_name(512, 3), "basis_n512_k3.gftb");
}
