#include <stdio.h>
#include <string.h>
#include "astrorepair.h"

int main(void) {
    AstroConfig *cfg = NULL;
    if (astro_config_default(&cfg) != ASTRO_STATUS_OK) return 1;
    uint64_t n = 0;
    if (astro_cluster_count(cfg, ASTRO_CORE_KIND_UBRAIN, 522000, &n) != ASTRO_STATUS_OK || n != 30) return 2;
    AstroReport *rep = NULL;
    if (astro_run(cfg, ASTRO_COMMAND_CLUSTERS, 0, &rep) != ASTRO_STATUS_OK) return 3;
    if (!astro_report_passed(rep)) return 4;
    if (!strstr(astro_report_summary(rep), "14/14")) return 5;
    astro_report_free(rep);
    AstroConfig *bad = NULL;
    if (astro_config_from_json("{\"oops\": 1}", &bad) != ASTRO_STATUS_CONFIG) return 6;
    if (strlen(astro_last_error()) == 0) return 7;
    astro_config_free(cfg);
    printf("ok\n");
    return 0;
}
