#include <math.h>
#include <stdio.h>

#include "geoflow.h"

int main(void) {
    GfField *v = NULL, *w = NULL, *g = NULL;
    GfCascadeReport *report = NULL;
    GfVerdict verdict;
    size_t step = 0;
    const double tau = 6.283185307179586;

    if (gf_field_cosine(tau, tau, 16, 1, 0, 1.0, 1.25, &v) != GF_STATUS_OK ||
        gf_field_cosine(tau, tau, 16, 0, 1, 1.0, 1.25, &w) != GF_STATUS_OK ||
        gf_field_add(v, w, &g) != GF_STATUS_OK) {
        char *msg = gf_last_error_message();
        fprintf(stderr, "setup failed: %s\n", msg ? msg : "?");
        gf_string_free(msg);
        return 1;
    }
    if (gf_cascade_run(g, 2, 1.0, 1.0, 0.0, &report) != GF_STATUS_OK) {
        return 1;
    }
    gf_cascade_verdict(report, &verdict, &step);
    printf("geoflow %s: verdict %d, closing residual %.3e\n", gf_version(), (int)verdict,
           gf_cascade_closing_norm(report));

    gf_cascade_report_free(report);
    gf_field_free(g);
    gf_field_free(w);
    gf_field_free(v);
    return verdict == GF_VERDICT_INTEGRAL_FOUND ? 0 : 2;
}
