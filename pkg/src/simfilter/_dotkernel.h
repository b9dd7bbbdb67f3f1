/*
 * Blocked dot-product kernel: C[i][j] = sum_k A[i][k] * B[j][k].
 *
 * Every output element is a strict left fold over k in increasing order,
 * accumulated in double precision and started from 0.0. Blocking and SIMD
 * only vectorise across output columns, never across k, so the result is
 * bit-identical to the scalar loop
 *
 *     s = 0.0; for (k = 0; k < d; k++) s += (double)a[k] * (double)b[k];
 *
 * provided the compiler does not contract a*b+s into an FMA
 * (build with -ffp-contract=off).
 */
#ifndef SIMFILTER_DOTKERNEL_H
#define SIMFILTER_DOTKERNEL_H

#include <stddef.h>
#include <stdlib.h>
#include <string.h>
#include <stdint.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#ifndef SF_MR
#define SF_MR 4
#endif
#ifndef SF_NR
#define SF_NR 8
#endif
#define SF_KC 256
#define SF_NC 256

#define SF_DEFINE_PACKERS(SUFFIX, T)                                          \
static void sf_pack_a_##SUFFIX(const T *A, ptrdiff_t lda, ptrdiff_t i0,       \
                               ptrdiff_t p, ptrdiff_t k0, ptrdiff_t kc,       \
                               double *Ap)                                    \
{                                                                             \
    for (ptrdiff_t ii = 0; ii < SF_MR; ii++) {                                \
        ptrdiff_t i = i0 + ii;                                                \
        if (i < p) {                                                          \
            const T *src = A + i * lda + k0;                                  \
            for (ptrdiff_t k = 0; k < kc; k++)                                \
                Ap[k * SF_MR + ii] = (double)src[k];                          \
        } else {                                                              \
            for (ptrdiff_t k = 0; k < kc; k++)                                \
                Ap[k * SF_MR + ii] = 0.0;                                     \
        }                                                                     \
    }                                                                         \
}                                                                             \
                                                                              \
static void sf_pack_b_##SUFFIX(const T *B, ptrdiff_t ldb, ptrdiff_t j0,       \
                               ptrdiff_t nc, ptrdiff_t q, ptrdiff_t k0,       \
                               ptrdiff_t kc, double *Bp)                      \
{                                                                             \
    ptrdiff_t strips = (nc + SF_NR - 1) / SF_NR;                              \
    for (ptrdiff_t s = 0; s < strips; s++) {                                  \
        double *dst = Bp + s * kc * SF_NR;                                    \
        for (ptrdiff_t jj = 0; jj < SF_NR; jj++) {                            \
            ptrdiff_t j = j0 + s * SF_NR + jj;                                \
            if (j < q && s * SF_NR + jj < nc) {                               \
                const T *src = B + j * ldb + k0;                              \
                for (ptrdiff_t k = 0; k < kc; k++)                            \
                    dst[k * SF_NR + jj] = (double)src[k];                     \
            } else {                                                          \
                for (ptrdiff_t k = 0; k < kc; k++)                            \
                    dst[k * SF_NR + jj] = 0.0;                                \
            }                                                                 \
        }                                                                     \
    }                                                                         \
}                                                                             \
                                                                              \
static double sf_sqnorm_##SUFFIX(const T *a, ptrdiff_t d)                     \
{                                                                             \
    double s = 0.0;                                                           \
    for (ptrdiff_t k = 0; k < d; k++) {                                       \
        double v = (double)a[k];                                              \
        s += v * v;                                                           \
    }                                                                         \
    return s;                                                                 \
}

SF_DEFINE_PACKERS(f32, float)
SF_DEFINE_PACKERS(f64, double)

static inline void sf_micro(const double *restrict Ap,
                            const double *restrict Bp, ptrdiff_t kc,
                            double acc[SF_MR][SF_NR])
{
    for (ptrdiff_t k = 0; k < kc; k++) {
        const double *a = Ap + k * SF_MR;
        const double *b = Bp + k * SF_NR;
        for (int ii = 0; ii < SF_MR; ii++) {
            const double av = a[ii];
            for (int jj = 0; jj < SF_NR; jj++)
                acc[ii][jj] += av * b[jj];
        }
    }
}

/* One NC-wide column panel. Panels are independent, so they are the unit
 * of parallel work. */
#define SF_DEFINE_PANEL(SUFFIX, T)                                            \
static void sf_panel_##SUFFIX(const T *A, ptrdiff_t lda, ptrdiff_t p,         \
                              const T *B, ptrdiff_t ldb, ptrdiff_t q,         \
                              ptrdiff_t d, double *C, ptrdiff_t ldc,          \
                              ptrdiff_t j0, double *Ap, double *Bp)           \
{                                                                             \
    ptrdiff_t nc = q - j0 < SF_NC ? q - j0 : SF_NC;                           \
    ptrdiff_t strips = (nc + SF_NR - 1) / SF_NR;                              \
    for (ptrdiff_t k0 = 0; k0 < d; k0 += SF_KC) {                             \
        ptrdiff_t kc = d - k0 < SF_KC ? d - k0 : SF_KC;                       \
        sf_pack_b_##SUFFIX(B, ldb, j0, nc, q, k0, kc, Bp);                    \
        for (ptrdiff_t i0 = 0; i0 < p; i0 += SF_MR) {                         \
            ptrdiff_t mr = p - i0 < SF_MR ? p - i0 : SF_MR;                   \
            sf_pack_a_##SUFFIX(A, lda, i0, p, k0, kc, Ap);                    \
            for (ptrdiff_t s = 0; s < strips; s++) {                          \
                ptrdiff_t jb = j0 + s * SF_NR;                                \
                ptrdiff_t nr = j0 + nc - jb < SF_NR ? j0 + nc - jb : SF_NR;   \
                double acc[SF_MR][SF_NR];                                     \
                for (int ii = 0; ii < SF_MR; ii++)                            \
                    for (int jj = 0; jj < SF_NR; jj++)                        \
                        acc[ii][jj] = (k0 == 0 || ii >= mr || jj >= nr)       \
                            ? 0.0 : C[(i0 + ii) * ldc + jb + jj];             \
                sf_micro(Ap, Bp + s * kc * SF_NR, kc, acc);                   \
                for (ptrdiff_t ii = 0; ii < mr; ii++)                         \
                    for (ptrdiff_t jj = 0; jj < nr; jj++)                     \
                        C[(i0 + ii) * ldc + jb + jj] = acc[ii][jj];           \
            }                                                                 \
        }                                                                     \
    }                                                                         \
}                                                                             \
                                                                              \
static int sf_dot_matrix_##SUFFIX(const T *A, ptrdiff_t lda, ptrdiff_t p,     \
                                  const T *B, ptrdiff_t ldb, ptrdiff_t q,     \
                                  ptrdiff_t d, double *C, ptrdiff_t ldc,      \
                                  int threads)                                \
{                                                                             \
    ptrdiff_t panels = (q + SF_NC - 1) / SF_NC;                               \
    int failed = 0;                                                           \
    if (p == 0 || q == 0)                                                     \
        return 0;                                                             \
    if (d == 0) {                                                             \
        for (ptrdiff_t i = 0; i < p; i++)                                     \
            memset(C + i * ldc, 0, (size_t)q * sizeof(double));               \
        return 0;                                                             \
    }                                                                         \
    if (threads < 1)                                                          \
        threads = 1;                                                          \
    _Pragma("omp parallel num_threads(threads) reduction(|:failed)")          \
    {                                                                         \
        double *Ap = malloc(sizeof(double) * SF_MR * SF_KC);                  \
        double *Bp = malloc(sizeof(double) * SF_NC * SF_KC);                  \
        /* every thread must reach the worksharing loop */                 \
        _Pragma("omp for schedule(static)")                                   \
        for (ptrdiff_t t = 0; t < panels; t++) {                              \
            if (Ap == NULL || Bp == NULL)                                     \
                failed = 1;                                                   \
            else                                                              \
                sf_panel_##SUFFIX(A, lda, p, B, ldb, q, d, C, ldc,            \
                                  t * SF_NC, Ap, Bp);                         \
        }                                                                     \
        free(Ap);                                                             \
        free(Bp);                                                             \
    }                                                                         \
    return failed ? -1 : 0;                                                   \
}

SF_DEFINE_PANEL(f32, float)
SF_DEFINE_PANEL(f64, double)

#endif
