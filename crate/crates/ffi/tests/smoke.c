#include <stdio.h>
#include "geostretch.h"

int main(void) {
    const char *names[] = {"eta"};
    const double values[] = {3.0};
    GsModel *m = NULL;
    if (gs_model_new("davis-skodje", names, values, 1, &m) != GS_STATUS_OK) {
        fprintf(stderr, "%s\n", gs_last_error_message());
        return 1;
    }
    const double x[] = {1.0, 0.5};
    double tan = 0.0, orth = 0.0;
    if (gs_theta_extrema(m, x, 2, &tan, &orth) != GS_STATUS_OK) {
        fprintf(stderr, "%s\n", gs_last_error_message());
        return 1;
    }
    gs_model_free(m);
    GsModel *bad = NULL;
    GsStatus s = gs_model_new("nope", NULL, NULL, 0, &bad);
    printf("tan %.15g orth %.15g unknown-model %d\n", tan, orth, (int)s);
    return bad == NULL ? 0 : 1;
}
