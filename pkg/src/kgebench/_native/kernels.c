/* Numeric kernels for embedding training, scoring, and benchmark probes.
 *
 * This translation unit is compiled twice by the Python loader: once with
 * compiler auto-vectorization disabled (the "scalar" backend) and once with
 * full host-CPU optimization (the "vector" backend). Reduction loops are
 * lane-structured with a fixed accumulation order, so the optimizing build
 * can map the lanes onto SIMD registers while each backend's result stays
 * deterministic run-to-run. The two backends are NOT required to agree
 * bitwise (FMA contraction and lane widths differ), only within tolerance.
 *
 * All functions are pure with respect to their inputs except explicit
 * output pointers; the training batch step owns its scratch memory and is
 * safe to call from a single orchestrating thread.
 */

#define _POSIX_C_SOURCE 199309L

#include <math.h>
#include <pthread.h>
#include <stdint.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

#define LANES 16

/* ------------------------------------------------------------------ */
/* elementary kernels                                                  */
/* ------------------------------------------------------------------ */

float kgeb_dot(const float *a, const float *b, int64_t n) {
    float acc[LANES] = {0};
    int64_t nl = n - (n % LANES);
    for (int64_t i = 0; i < nl; i += LANES)
        for (int l = 0; l < LANES; l++)
            acc[l] += a[i + l] * b[i + l];
    float s = 0.0f;
    for (int l = 0; l < LANES; l++)
        s += acc[l];
    for (int64_t i = nl; i < n; i++)
        s += a[i] * b[i];
    return s;
}

float kgeb_trilinear(const float *h, const float *r, const float *t, int64_t n) {
    /* grouping (h*t)*r keeps the result bitwise symmetric under h/t
     * exchange (elementwise multiply commutes; only the first product
     * rounds) */
    float acc[LANES] = {0};
    int64_t nl = n - (n % LANES);
    for (int64_t i = 0; i < nl; i += LANES)
        for (int l = 0; l < LANES; l++)
            acc[l] += (h[i + l] * t[i + l]) * r[i + l];
    float s = 0.0f;
    for (int l = 0; l < LANES; l++)
        s += acc[l];
    for (int64_t i = nl; i < n; i++)
        s += (h[i] * t[i]) * r[i];
    return s;
}

float kgeb_l1_dist(const float *a, const float *b, int64_t n) {
    float acc[LANES] = {0};
    int64_t nl = n - (n % LANES);
    for (int64_t i = 0; i < nl; i += LANES)
        for (int l = 0; l < LANES; l++)
            acc[l] += fabsf(a[i + l] - b[i + l]);
    float s = 0.0f;
    for (int l = 0; l < LANES; l++)
        s += acc[l];
    for (int64_t i = nl; i < n; i++)
        s += fabsf(a[i] - b[i]);
    return s;
}

float kgeb_l2_dist(const float *a, const float *b, int64_t n) {
    float acc[LANES] = {0};
    int64_t nl = n - (n % LANES);
    for (int64_t i = 0; i < nl; i += LANES)
        for (int l = 0; l < LANES; l++) {
            float dlt = a[i + l] - b[i + l];
            acc[l] += dlt * dlt;
        }
    float s = 0.0f;
    for (int l = 0; l < LANES; l++)
        s += acc[l];
    for (int64_t i = nl; i < n; i++) {
        float dlt = a[i] - b[i];
        s += dlt * dlt;
    }
    return sqrtf(s);
}

void kgeb_axpy(float alpha, const float *x, const float *y, float *out, int64_t n) {
    for (int64_t i = 0; i < n; i++)
        out[i] = alpha * x[i] + y[i];
}

void kgeb_relu(const float *x, float *out, int64_t n) {
    for (int64_t i = 0; i < n; i++)
        out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

/* filters: tau * 3 floats (w1, w2, w3 per filter); out: tau * d floats,
 * filter-major. */
void kgeb_conv3_rows(const float *h, const float *r, const float *t, int64_t d,
                     const float *filters, int64_t tau, float *out) {
    for (int64_t k = 0; k < tau; k++) {
        float w1 = filters[3 * k + 0];
        float w2 = filters[3 * k + 1];
        float w3 = filters[3 * k + 2];
        float *row = out + k * d;
        for (int64_t i = 0; i < d; i++)
            row[i] = w1 * h[i] + w2 * r[i] + w3 * t[i];
    }
}

/* ------------------------------------------------------------------ */
/* benchmark probes                                                    */
/* ------------------------------------------------------------------ */

static double monotonic_seconds(void) {
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (double)ts.tv_sec + (double)ts.tv_nsec * 1e-9;
}

/* Repeatedly computes dot(pool[r % n_vecs], b); the rotating operand and
 * the accumulated sink keep the loop from being folded away. Returns
 * elapsed seconds measured around the rep loop only. */
double kgeb_bench_dot(const float *pool, int64_t n_vecs, const float *b,
                      int64_t n, int64_t reps, double *sink) {
    double s = 0.0;
    double t0 = monotonic_seconds();
    for (int64_t rep = 0; rep < reps; rep++)
        s += (double)kgeb_dot(pool + (rep % n_vecs) * n, b, n);
    double t1 = monotonic_seconds();
    *sink = s;
    return t1 - t0;
}

/* Burns CPU on the calling thread for approximately `seconds` wall time. */
double kgeb_spin(double seconds) {
    volatile double x = 1.0000001;
    double t0 = monotonic_seconds();
    uint64_t iters = 0;
    for (;;) {
        for (int i = 0; i < 20000; i++)
            x = x * 1.0000001 + 1e-12;
        iters++;
        if (monotonic_seconds() - t0 >= seconds)
            break;
    }
    return x + (double)iters;
}

/* ------------------------------------------------------------------ */
/* triple scoring                                                      */
/* ------------------------------------------------------------------ */

/* model codes: 0 = TransE L1, 1 = TransE L2, 2 = DistMult, 3 = ConvKB */

static float score_one(int model, const float *ent, const float *rel, int64_t d,
                       const float *filters, int64_t tau, const float *w,
                       int32_t h, int32_t r, int32_t t) {
    const float *vh = ent + (int64_t)h * d;
    const float *vr = rel + (int64_t)r * d;
    const float *vt = ent + (int64_t)t * d;
    switch (model) {
    case 0: {
        float acc[LANES] = {0};
        int64_t nl = d - (d % LANES);
        for (int64_t i = 0; i < nl; i += LANES)
            for (int l = 0; l < LANES; l++)
                acc[l] += fabsf(vh[i + l] + vr[i + l] - vt[i + l]);
        float s = 0.0f;
        for (int l = 0; l < LANES; l++)
            s += acc[l];
        for (int64_t i = nl; i < d; i++)
            s += fabsf(vh[i] + vr[i] - vt[i]);
        return -s;
    }
    case 1: {
        float acc[LANES] = {0};
        int64_t nl = d - (d % LANES);
        for (int64_t i = 0; i < nl; i += LANES)
            for (int l = 0; l < LANES; l++) {
                float dlt = vh[i + l] + vr[i + l] - vt[i + l];
                acc[l] += dlt * dlt;
            }
        float s = 0.0f;
        for (int l = 0; l < LANES; l++)
            s += acc[l];
        for (int64_t i = nl; i < d; i++) {
            float dlt = vh[i] + vr[i] - vt[i];
            s += dlt * dlt;
        }
        return -sqrtf(s);
    }
    case 2:
        return kgeb_trilinear(vh, vr, vt, d);
    case 3: {
        float s = 0.0f;
        for (int64_t k = 0; k < tau; k++) {
            float w1 = filters[3 * k + 0];
            float w2 = filters[3 * k + 1];
            float w3 = filters[3 * k + 2];
            const float *wk = w + k * d;
            float acc = 0.0f;
            for (int64_t i = 0; i < d; i++) {
                float pre = w1 * vh[i] + w2 * vr[i] + w3 * vt[i];
                acc += wk[i] * (pre > 0.0f ? pre : 0.0f);
            }
            s += acc;
        }
        return s;
    }
    default:
        return 0.0f;
    }
}

typedef struct {
    int model;
    const float *ent, *rel, *filters, *w;
    int64_t d, tau;
    const int32_t *triples;
    int64_t start, end;
    float *out;
} score_task;

static void *score_worker(void *arg) {
    score_task *ts = (score_task *)arg;
    for (int64_t i = ts->start; i < ts->end; i++) {
        const int32_t *tr = ts->triples + i * 3;
        ts->out[i] = score_one(ts->model, ts->ent, ts->rel, ts->d, ts->filters,
                               ts->tau, ts->w, tr[0], tr[1], tr[2]);
    }
    return NULL;
}

/* Balanced contiguous partition of [0, n) into `parts` ranges. */
static void partition(int64_t n, int parts, int64_t *bounds) {
    int64_t base = n / parts, extra = n % parts, at = 0;
    bounds[0] = 0;
    for (int p = 0; p < parts; p++) {
        at += base + (p < extra ? 1 : 0);
        bounds[p + 1] = at;
    }
}

int kgeb_score_batch(int model, const float *ent, const float *rel, int64_t d,
                     const float *filters, int64_t tau, const float *w,
                     const int32_t *triples, int64_t n, int threads, float *out) {
    if (threads < 1)
        threads = 1;
    if (threads == 1) {
        score_task ts = {model, ent, rel, filters, w, d, tau, triples, 0, n, out};
        score_worker(&ts);
        return 0;
    }
    int64_t bounds[64 + 1];
    if (threads > 64)
        threads = 64;
    partition(n, threads, bounds);
    score_task tasks[64];
    pthread_t tids[64];
    for (int p = 0; p < threads; p++) {
        score_task ts = {model, ent, rel, filters, w, d, tau, triples,
                         bounds[p], bounds[p + 1], out};
        tasks[p] = ts;
        if (pthread_create(&tids[p], NULL, score_worker, &tasks[p]) != 0) {
            for (int q = 0; q < p; q++)
                pthread_join(tids[q], NULL);
            return 1;
        }
    }
    for (int p = 0; p < threads; p++)
        pthread_join(tids[p], NULL);
    return 0;
}

/* ------------------------------------------------------------------ */
/* training batch step                                                 */
/* ------------------------------------------------------------------ */

/* Prefetch one parameter row (d floats) into cache. */
static inline void prefetch_row(const float *row, int64_t d) {
    const char *p = (const char *)row;
    const char *end = (const char *)(row + d);
    for (; p < end; p += 64)
        __builtin_prefetch(p, 0, 1);
}

/* Persistent per-run workspace, allocated by the caller. Per-worker
 * regions are disjoint slices; maps must be -1-filled before first use
 * and are restored to -1 by the workers after every batch. */
typedef struct {
    int32_t *ent_ids;   /* threads * cap_ent: sorted unique entity rows */
    int64_t cap_ent;
    int32_t *rel_ids;   /* threads * cap_rel */
    int64_t cap_rel;
    float *ent_grads;   /* threads * cap_ent * d */
    float *rel_grads;   /* threads * cap_rel * d */
    float *shared_grads; /* threads * (3*tau + tau*d), ConvKB only */
    float *scratch;     /* d + 3*tau + tau*d */
    uint64_t *ent_bits; /* threads * ceil(n_ent/64), zeroed between batches */
    uint64_t *rel_bits; /* threads * ceil(n_rel/64) */
    int32_t *ent_map;   /* threads * n_ent: entity id -> compact row, else -1 */
    int32_t *rel_map;   /* threads * n_rel */
    int32_t *merged;    /* threads * cap_ent: merged row ids for the step */
} kgeb_workspace;

typedef struct {
    int model;
    const float *ent, *rel, *filters, *w;
    int64_t n_ent, n_rel, d, tau;
    const int32_t *pos;
    const int32_t *neg;
    int64_t n_pos, eta;
    float margin, inv_batch;
} batch_shared;

typedef struct {
    const batch_shared *sh;
    int64_t start, end;
    /* worker-private views into the shared workspace */
    int32_t *ent_rows;
    float *ent_grads;
    int64_t n_ent_rows;
    int32_t *rel_rows;
    float *rel_grads;
    int64_t n_rel_rows;
    float *shared_grads;
    uint64_t *ent_bits;
    uint64_t *rel_bits;
    int32_t *ent_map;
    int32_t *rel_map;
    double loss;
    int status;
} batch_worker;

/* Dedup raw ids via the worker's bitmap, emit them sorted ascending into
 * `rows`, point `map[id]` at the compact index, and leave the bitmap
 * zeroed again. Returns the unique count. */
static int64_t collect_rows(const int32_t *raw, int64_t n_raw, int64_t id_limit,
                            uint64_t *bits, int32_t *rows, int32_t *map) {
    for (int64_t i = 0; i < n_raw; i++) {
        int32_t id = raw[i];
        bits[id >> 6] |= (uint64_t)1 << (id & 63);
    }
    int64_t n_words = (id_limit + 63) >> 6;
    int64_t k = 0;
    for (int64_t wd = 0; wd < n_words; wd++) {
        uint64_t bitsw = bits[wd];
        if (!bitsw)
            continue;
        bits[wd] = 0;
        while (bitsw) {
            int bit = __builtin_ctzll(bitsw);
            bitsw &= bitsw - 1;
            int32_t id = (int32_t)((wd << 6) + bit);
            rows[k] = id;
            map[id] = (int32_t)k;
            k++;
        }
    }
    return k;
}

/* Adds coef * d(score)/d(embedding rows) for one triple into the worker's
 * compact buffers; aliased rows (h == t) accumulate correctly. */
static void accum_score_grad(batch_worker *bw, int32_t h, int32_t r, int32_t t,
                             float coef) {
    const batch_shared *sh = bw->sh;
    int64_t d = sh->d;
    const float *vh = sh->ent + (int64_t)h * d;
    const float *vr = sh->rel + (int64_t)r * d;
    const float *vt = sh->ent + (int64_t)t * d;
    float *gh = bw->ent_grads + (int64_t)bw->ent_map[h] * d;
    float *gr = bw->rel_grads + (int64_t)bw->rel_map[r] * d;
    float *gt = bw->ent_grads + (int64_t)bw->ent_map[t] * d;

    switch (sh->model) {
    case 0: { /* score = -sum |h+r-t|; subgradient with sign(0) = 0 */
        for (int64_t i = 0; i < d; i++) {
            float x = vh[i] + vr[i] - vt[i];
            float sg = (float)((x > 0.0f) - (x < 0.0f));
            gh[i] -= coef * sg;
            gr[i] -= coef * sg;
            gt[i] += coef * sg;
        }
        break;
    }
    case 1: { /* score = -||h+r-t||2; gradient 0 at zero distance */
        float acc = 0.0f;
        for (int64_t i = 0; i < d; i++) {
            float x = vh[i] + vr[i] - vt[i];
            acc += x * x;
        }
        float dist = sqrtf(acc);
        if (dist > 1e-12f) {
            float inv = coef / dist;
            for (int64_t i = 0; i < d; i++) {
                float x = vh[i] + vr[i] - vt[i];
                gh[i] -= inv * x;
                gr[i] -= inv * x;
                gt[i] += inv * x;
            }
        }
        break;
    }
    case 2: { /* score = sum r*h*t */
        for (int64_t i = 0; i < d; i++) {
            gh[i] += coef * vr[i] * vt[i];
            gr[i] += coef * vh[i] * vt[i];
            gt[i] += coef * vh[i] * vr[i];
        }
        break;
    }
    case 3: { /* ConvKB: relu feature map dotted with w */
        int64_t tau = sh->tau;
        float *gf = bw->shared_grads;           /* 3*tau filter grads */
        float *gw = bw->shared_grads + 3 * tau; /* tau*d w grads */
        for (int64_t k = 0; k < tau; k++) {
            float w1 = sh->filters[3 * k + 0];
            float w2 = sh->filters[3 * k + 1];
            float w3 = sh->filters[3 * k + 2];
            const float *wk = sh->w + k * d;
            float *gwk = gw + k * d;
            float gf1 = 0.0f, gf2 = 0.0f, gf3 = 0.0f;
            for (int64_t i = 0; i < d; i++) {
                float pre = w1 * vh[i] + w2 * vr[i] + w3 * vt[i];
                if (pre > 0.0f) {
                    float cw = coef * wk[i];
                    gh[i] += cw * w1;
                    gr[i] += cw * w2;
                    gt[i] += cw * w3;
                    gf1 += coef * wk[i] * vh[i];
                    gf2 += coef * wk[i] * vr[i];
                    gf3 += coef * wk[i] * vt[i];
                    gwk[i] += coef * pre;
                }
            }
            gf[3 * k + 0] += gf1;
            gf[3 * k + 1] += gf2;
            gf[3 * k + 2] += gf3;
        }
        break;
    }
    }
}

static void *batch_grad_worker(void *arg) {
    batch_worker *bw = (batch_worker *)arg;
    const batch_shared *sh = bw->sh;
    int64_t m = bw->end - bw->start;
    bw->loss = 0.0;
    bw->status = 0;
    bw->n_ent_rows = bw->n_rel_rows = 0;
    if (m <= 0)
        return NULL;

    /* gather candidate row ids: positive h/t, each negative's h/t, and
     * the (never corrupted) relation */
    int64_t at = 0;
    for (int64_t i = bw->start; i < bw->end; i++) {
        const int32_t *p = sh->pos + i * 3;
        bw->ent_rows[at++] = p[0];
        bw->ent_rows[at++] = p[2];
        bw->rel_rows[i - bw->start] = p[1];
        for (int64_t j = 0; j < sh->eta; j++) {
            const int32_t *q = sh->neg + (i * sh->eta + j) * 3;
            bw->ent_rows[at++] = q[0];
            bw->ent_rows[at++] = q[2];
        }
    }
    bw->n_ent_rows = collect_rows(bw->ent_rows, at, sh->n_ent, bw->ent_bits,
                                  bw->ent_rows, bw->ent_map);
    bw->n_rel_rows = collect_rows(bw->rel_rows, m, sh->n_rel, bw->rel_bits,
                                  bw->rel_rows, bw->rel_map);

    memset(bw->ent_grads, 0, (size_t)(bw->n_ent_rows * sh->d) * sizeof(float));
    memset(bw->rel_grads, 0, (size_t)(bw->n_rel_rows * sh->d) * sizeof(float));
    if (sh->model == 3)
        memset(bw->shared_grads, 0,
               (size_t)(3 * sh->tau + sh->tau * sh->d) * sizeof(float));

    for (int64_t i = bw->start; i < bw->end; i++) {
        if (i + 1 < bw->end) {
            const int32_t *np = sh->pos + (i + 1) * 3;
            prefetch_row(sh->ent + (int64_t)np[0] * sh->d, sh->d);
            prefetch_row(sh->ent + (int64_t)np[2] * sh->d, sh->d);
            for (int64_t j = 0; j < sh->eta; j++) {
                const int32_t *nq = sh->neg + ((i + 1) * sh->eta + j) * 3;
                prefetch_row(sh->ent + (int64_t)nq[0] * sh->d, sh->d);
                prefetch_row(sh->ent + (int64_t)nq[2] * sh->d, sh->d);
            }
        }
        const int32_t *p = sh->pos + i * 3;
        float s_pos = score_one(sh->model, sh->ent, sh->rel, sh->d, sh->filters,
                                sh->tau, sh->w, p[0], p[1], p[2]);
        int n_active = 0;
        for (int64_t j = 0; j < sh->eta; j++) {
            const int32_t *q = sh->neg + (i * sh->eta + j) * 3;
            float s_neg = score_one(sh->model, sh->ent, sh->rel, sh->d, sh->filters,
                                    sh->tau, sh->w, q[0], q[1], q[2]);
            float hinge = sh->margin - s_pos + s_neg;
            if (hinge > 0.0f) {
                bw->loss += (double)hinge;
                n_active++;
                accum_score_grad(bw, q[0], q[1], q[2], sh->inv_batch);
            }
        }
        if (n_active > 0)
            accum_score_grad(bw, p[0], p[1], p[2], -sh->inv_batch * (float)n_active);
    }

    /* restore the -1 invariant for the next batch */
    for (int64_t k = 0; k < bw->n_ent_rows; k++)
        bw->ent_map[bw->ent_rows[k]] = -1;
    for (int64_t k = 0; k < bw->n_rel_rows; k++)
        bw->rel_map[bw->rel_rows[k]] = -1;
    return NULL;
}

/* One Adam update of a single parameter row from an already-merged
 * gradient; bias correction factors are precomputed by the caller. */
static void adam_row(float *theta, float *m, float *v, const float *g, int64_t d,
                     float lr, float b1, float b2, float eps, float c1, float c2) {
    for (int64_t i = 0; i < d; i++) {
        float gi = g[i];
        float mi = b1 * m[i] + (1.0f - b1) * gi;
        float vi = b2 * v[i] + (1.0f - b2) * gi * gi;
        m[i] = mi;
        v[i] = vi;
        theta[i] -= lr * (mi * c1) / (sqrtf(vi * c2) + eps);
    }
}

static void normalize_row(float *row, int64_t d) {
    float acc = 0.0f;
    for (int64_t i = 0; i < d; i++)
        acc += row[i] * row[i];
    float norm = sqrtf(acc);
    if (norm > 1e-12f) {
        float inv = 1.0f / norm;
        for (int64_t i = 0; i < d; i++)
            row[i] *= inv;
    }
}

/* Linear T-way merge of the workers' sorted unique id lists. */
static int64_t merge_ids(batch_worker *workers, int n_workers, int which_ent,
                         int32_t *out) {
    int64_t idx[64] = {0};
    int64_t k = 0;
    for (;;) {
        int32_t cur = INT32_MAX;
        for (int p = 0; p < n_workers; p++) {
            batch_worker *bw = &workers[p];
            int64_t n = which_ent ? bw->n_ent_rows : bw->n_rel_rows;
            const int32_t *rows = which_ent ? bw->ent_rows : bw->rel_rows;
            if (idx[p] < n && rows[idx[p]] < cur)
                cur = rows[idx[p]];
        }
        if (cur == INT32_MAX)
            return k;
        out[k++] = cur;
        for (int p = 0; p < n_workers; p++) {
            batch_worker *bw = &workers[p];
            int64_t n = which_ent ? bw->n_ent_rows : bw->n_rel_rows;
            const int32_t *rows = which_ent ? bw->ent_rows : bw->rel_rows;
            if (idx[p] < n && rows[idx[p]] == cur)
                idx[p]++;
        }
    }
}

/* For each merged row id: sum the worker contributions in ascending worker
 * index, then apply one Adam update. Single-threaded by contract; the next
 * row's parameter and moment lines are prefetched to hide the random-row
 * latency, and rows touched by a single worker (the common case) are fed
 * to Adam directly without a copy. Moments are interleaved row-wise as
 * [m_row | v_row] in one table of width 2*d. */
static void merge_and_step(batch_worker *workers, int n_workers, int which_ent,
                           const int32_t *merged, int64_t n_merged, float *table,
                           float *mom, int64_t d, float lr, float b1, float b2,
                           float eps, float c1, float c2, int normalize,
                           float *scratch) {
    int64_t idx[64] = {0};
    for (int64_t k = 0; k < n_merged; k++) {
        if (k + 1 < n_merged) {
            int64_t nxt = (int64_t)merged[k + 1];
            prefetch_row(table + nxt * d, d);
            prefetch_row(mom + nxt * 2 * d, 2 * d);
        }
        int32_t cur = merged[k];
        const float *g = NULL;
        int n_contrib = 0;
        for (int p = 0; p < n_workers; p++) {
            batch_worker *bw = &workers[p];
            int64_t n = which_ent ? bw->n_ent_rows : bw->n_rel_rows;
            const int32_t *rows = which_ent ? bw->ent_rows : bw->rel_rows;
            const float *grads = which_ent ? bw->ent_grads : bw->rel_grads;
            if (idx[p] < n && rows[idx[p]] == cur) {
                const float *gp = grads + idx[p] * d;
                idx[p]++;
                if (n_contrib == 0) {
                    g = gp;
                } else {
                    if (n_contrib == 1) {
                        memcpy(scratch, g, (size_t)d * sizeof(float));
                        g = scratch;
                    }
                    for (int64_t i = 0; i < d; i++)
                        scratch[i] += gp[i];
                }
                n_contrib++;
            }
        }
        float *row = table + (int64_t)cur * d;
        float *mrow = mom + (int64_t)cur * 2 * d;
        adam_row(row, mrow, mrow + d, g, d, lr, b1, b2, eps, c1, c2);
        if (normalize)
            normalize_row(row, d);
    }
}

/* mom_ent / mom_rel hold row-interleaved Adam moments ([m_row | v_row],
 * width 2*d per row); mom_shared holds m then v halves for the flat ConvKB
 * shared parameters. */
int kgeb_train_batch(int model, float *ent, int64_t n_ent, float *rel,
                     int64_t n_rel, int64_t d, float *filters, float *w,
                     int64_t tau, float *mom_ent, float *mom_rel,
                     float *mom_shared, const int32_t *pos, int64_t n_pos,
                     const int32_t *neg, int64_t eta, float margin,
                     float inv_batch, int threads, int64_t adam_t, float lr,
                     float beta1, float beta2, float eps,
                     int normalize_entities, const kgeb_workspace *ws,
                     double *loss_out) {
    if (threads < 1)
        threads = 1;
    if (threads > 64)
        threads = 64;

    batch_shared sh = {.model = model,
                       .ent = ent,
                       .rel = rel,
                       .filters = filters,
                       .w = w,
                       .n_ent = n_ent,
                       .n_rel = n_rel,
                       .d = d,
                       .tau = tau,
                       .pos = pos,
                       .neg = neg,
                       .n_pos = n_pos,
                       .eta = eta,
                       .margin = margin,
                       .inv_batch = inv_batch};

    int64_t bounds[64 + 1];
    partition(n_pos, threads, bounds);
    int64_t n_shared = 3 * tau + tau * d;
    int64_t ent_bm_words = (n_ent + 63) >> 6;
    int64_t rel_bm_words = (n_rel + 63) >> 6;
    batch_worker workers[64];
    memset(workers, 0, sizeof(workers));
    for (int p = 0; p < threads; p++) {
        workers[p].sh = &sh;
        workers[p].start = bounds[p];
        workers[p].end = bounds[p + 1];
        if ((bounds[p + 1] - bounds[p]) * (2 + 2 * eta) > ws->cap_ent ||
            bounds[p + 1] - bounds[p] > ws->cap_rel)
            return 3; /* workspace capacity too small */
        workers[p].ent_rows = ws->ent_ids + p * ws->cap_ent;
        workers[p].rel_rows = ws->rel_ids + p * ws->cap_rel;
        workers[p].ent_grads = ws->ent_grads + p * ws->cap_ent * d;
        workers[p].rel_grads = ws->rel_grads + p * ws->cap_rel * d;
        workers[p].shared_grads =
            (model == 3) ? ws->shared_grads + p * n_shared : NULL;
        workers[p].ent_bits = ws->ent_bits + p * ent_bm_words;
        workers[p].rel_bits = ws->rel_bits + p * rel_bm_words;
        workers[p].ent_map = ws->ent_map + p * n_ent;
        workers[p].rel_map = ws->rel_map + p * n_rel;
    }

    int rc = 0;
    if (threads == 1) {
        batch_grad_worker(&workers[0]);
    } else {
        pthread_t tids[64];
        int spawned = 0;
        for (int p = 0; p < threads; p++) {
            if (pthread_create(&tids[p], NULL, batch_grad_worker, &workers[p]) != 0) {
                rc = 1;
                break;
            }
            spawned++;
        }
        for (int p = 0; p < spawned; p++)
            pthread_join(tids[p], NULL);
        if (rc)
            return rc;
    }

    double loss = 0.0;
    for (int p = 0; p < threads; p++) {
        if (workers[p].status != 0)
            rc = workers[p].status;
        loss += workers[p].loss;
    }

    if (rc == 0) {
        float c1 = (float)(1.0 / (1.0 - pow((double)beta1, (double)adam_t)));
        float c2 = (float)(1.0 / (1.0 - pow((double)beta2, (double)adam_t)));
        float *scratch = ws->scratch;
        float *shared_sum = ws->scratch + d;
        int64_t n_merged = merge_ids(workers, threads, 1, ws->merged);
        merge_and_step(workers, threads, 1, ws->merged, n_merged, ent, mom_ent,
                       d, lr, beta1, beta2, eps, c1, c2, normalize_entities,
                       scratch);
        n_merged = merge_ids(workers, threads, 0, ws->merged);
        merge_and_step(workers, threads, 0, ws->merged, n_merged, rel, mom_rel,
                       d, lr, beta1, beta2, eps, c1, c2, 0, scratch);
        if (model == 3) {
            memset(shared_sum, 0, (size_t)n_shared * sizeof(float));
            for (int p = 0; p < threads; p++) {
                if (!workers[p].shared_grads)
                    continue;
                for (int64_t i = 0; i < n_shared; i++)
                    shared_sum[i] += workers[p].shared_grads[i];
            }
            /* filters first, then w, matching the flat moment layout */
            adam_row(filters, mom_shared, mom_shared + n_shared, shared_sum,
                     3 * tau, lr, beta1, beta2, eps, c1, c2);
            adam_row(w, mom_shared + 3 * tau, mom_shared + n_shared + 3 * tau,
                     shared_sum + 3 * tau, tau * d, lr, beta1, beta2, eps, c1,
                     c2);
        }
    }

    *loss_out = loss * (double)inv_batch;
    return rc;
}
