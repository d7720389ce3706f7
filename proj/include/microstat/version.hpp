#ifndef MICROSTAT_VERSION_HPP
#define MICROSTAT_VERSION_HPP

#define MICROSTAT_VERSION "0.1.0"

#endif
