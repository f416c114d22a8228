#ifndef IMAP_IMAP_HPP_
#define IMAP_IMAP_HPP_

#include "imap/linalg.hpp"
#include "imap/integrators.hpp"
#include "imap/models.hpp"
#include "imap/trajectory.hpp"
#include "imap/optimizers.hpp"
#include "imap/imap_filter.hpp"
#include "imap/classical.hpp"
#include "imap/equivalence.hpp"
#include "imap/weightspace.hpp"
#include "imap/parallel.hpp"
#include "imap/bench.hpp"

#endif  // IMAP_IMAP_HPP_
