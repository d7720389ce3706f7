#ifndef MICROSTAT_MICROSTAT_HPP
#define MICROSTAT_MICROSTAT_HPP

#include "microstat/dataset.hpp"
#include "microstat/dataset_json.hpp"
#include "microstat/decontam.hpp"
#include "microstat/distances.hpp"
#include "microstat/errors.hpp"
#include "microstat/filter.hpp"
#include "microstat/lda.hpp"
#include "microstat/manifest.hpp"
#include "microstat/mcmc_diag.hpp"
#include "microstat/nb.hpp"
#include "microstat/nbglm.hpp"
#include "microstat/ordination.hpp"
#include "microstat/parallel.hpp"
#include "microstat/permtest.hpp"
#include "microstat/rng.hpp"
#include "microstat/simulate.hpp"
#include "microstat/special.hpp"
#include "microstat/svg.hpp"
#include "microstat/table_io.hpp"
#include "microstat/topicfit_json.hpp"
#include "microstat/transforms.hpp"
#include "microstat/tree.hpp"
#include "microstat/version.hpp"

#endif
