// Timing harness comparing the OpenMP kernels against the serial reference.
// Every pair is also checked for agreement, so a miscompiled kernel cannot
// report a speedup silently.

#include <chrono>
#include <cstdio>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "odet/kernels.hpp"
#include "odet/reference.hpp"
#include "odet/tensor.hpp"
#include "odet/wavelet.hpp"

using namespace odet;

namespace {

Tensor random_tensor(Dims dims, std::mt19937_64& rng) {
    Tensor t(dims);
    fill_normal(t, rng);
    return t;
}

template <typename Fn>
double time_best_of(int repeats, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best = std::min(best, dt);
    }
    return best;
}

void report(const char* name, double serial_s, double parallel_s, double max_diff) {
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   max|diff| %.2e\n",
                name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s, max_diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, %d threads\n\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled, both columns run serial code\n\n");
#endif
    std::mt19937_64 rng(99);

    {
        const Tensor x = random_tensor({4, 32, 64, 64}, rng);
        const Tensor k = random_tensor({32, 32, 3, 3}, rng);
        const ConvSpec spec = same_spec(3, 3);
        Tensor out_fast, out_slow;
        const double t_par = time_best_of(3, [&] { out_fast = conv2d(x, k, {}, spec); });
        const double t_ser =
            time_best_of(3, [&] { out_slow = reference::conv2d(x, k, {}, spec); });
        report("conv2d 3x3 32->32 @64", t_ser, t_par, max_abs_diff(out_fast, out_slow));
    }
    {
        const Tensor x = random_tensor({1, 64, 56, 56}, rng);
        const Tensor k = random_tensor({64, 1, 7, 7}, rng);
        const ConvSpec spec = same_spec(7, 7, 64);
        Tensor out_fast, out_slow;
        const double t_par = time_best_of(3, [&] { out_fast = conv2d(x, k, {}, spec); });
        const double t_ser =
            time_best_of(3, [&] { out_slow = reference::conv2d(x, k, {}, spec); });
        report("depthwise 7x7 64ch @56", t_ser, t_par, max_abs_diff(out_fast, out_slow));
    }
    {
        const Tensor x = random_tensor({2, 16, 48, 48}, rng);
        const Tensor k = random_tensor({16, 16, 3, 3}, rng);
        const ConvSpec spec = same_spec(3, 3);
        const Tensor up = random_tensor(conv2d_output_dims(x.dims(), k.dims(), spec), rng);
        ConvVjp fast, slow;
        const double t_par = time_best_of(3, [&] { fast = conv2d_vjp(x, k, spec, up); });
        const double t_ser =
            time_best_of(3, [&] { slow = reference::conv2d_vjp(x, k, spec, up); });
        const double diff = std::max(max_abs_diff(fast.dinput, slow.dinput),
                                     max_abs_diff(fast.dkernel, slow.dkernel));
        report("conv2d_vjp 3x3 16->16 @48", t_ser, t_par, diff);
    }
    {
        const Tensor x = random_tensor({4, 32, 128, 128}, rng);
        Tensor out_fast, out_slow;
        const double t_par = time_best_of(5, [&] { out_fast = haar_analysis_packed(x); });
        const double t_ser =
            time_best_of(5, [&] { out_slow = reference::haar_analysis_packed(x); });
        report("haar analysis 32ch @128", t_ser, t_par, max_abs_diff(out_fast, out_slow));

        Tensor back_fast, back_slow;
        const double it_par = time_best_of(5, [&] { back_fast = haar_synthesis_packed(out_fast); });
        const double it_ser =
            time_best_of(5, [&] { back_slow = reference::haar_synthesis_packed(out_fast); });
        report("haar synthesis 32ch @128", it_ser, it_par, max_abs_diff(back_fast, back_slow));
    }
    {
        std::mt19937_64 wrng(5);
        const Tensor x = random_tensor({1, 32, 96, 96}, rng);
        const WtConvWeights w = make_wtconv_weights(32, 3, 3, wrng);
        Tensor out;
        const double t = time_best_of(3, [&] { out = wtconv(x, w); });
        std::printf("%-28s %41s %9.3f ms\n", "wtconv L=3 32ch @96", "end-to-end", t * 1e3);
    }
    return 0;
}
