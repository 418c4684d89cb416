#include <stdio.h>
#include <string.h>

#include "tracklet3d.h"

#define CHECK(cond)                                             \
    do {                                                        \
        if (!(cond)) {                                          \
            fprintf(stderr, "check failed: %s\n", #cond);       \
            return 1;                                           \
        }                                                       \
    } while (0)

static const char *FRAME0 =
    "[{\"frame\":0,\"id\":\"a\",\"bbox\":[0,0,20,60],\"x\":10,\"y\":30,\"z\":5,"
    "\"pose\":[0,0],\"appearance\":[0.5,0.5]}]";
static const char *FRAME1 =
    "[{\"frame\":1,\"id\":\"b\",\"bbox\":[1,0,20,60],\"x\":11,\"y\":30,\"z\":5,"
    "\"pose\":[0,0],\"appearance\":[0.5,0.5]}]";

int main(void) {
    T3dTracker *t = NULL;
    CHECK(t3d_tracker_new(NULL, &t) == T3D_STATUS_OK);
    CHECK(t != NULL);

    char *out = NULL;
    CHECK(t3d_tracker_step(t, 0, FRAME0, &out) == T3D_STATUS_OK);
    CHECK(strstr(out, "\"track_id\":0") != NULL);
    t3d_string_free(out);

    CHECK(t3d_tracker_step(t, 1, FRAME1, &out) == T3D_STATUS_OK);
    CHECK(strstr(out, "\"track_id\":0") != NULL);
    CHECK(strstr(out, "\"matched\":true") != NULL);
    t3d_string_free(out);

    size_t n = 0;
    CHECK(t3d_tracker_num_tracks(t, &n) == T3D_STATUS_OK);
    CHECK(n == 1);

    CHECK(t3d_tracker_step(t, 1, "[]", &out) == T3D_STATUS_OUT_OF_ORDER_FRAME);
    CHECK(out == NULL);
    CHECK(t3d_last_error_message() != NULL);

    double nearness = 1.0;
    CHECK(t3d_to_nearness(1.0, &nearness) == T3D_STATUS_OK);
    CHECK(nearness == 0.0);

    t3d_tracker_free(t);
    printf("ok\n");
    return 0;
}
