#include "teamlab/qlearn.hpp"

#include <cstdio>

namespace teamlab::learn {

void QTable::write_csv(std::ostream& out) const {
  out << "state,action,value\n";
  char buf[96];
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", s, a, value(s, a));
      out << buf;
    }
  }
}

}  // namespace teamlab::learn
