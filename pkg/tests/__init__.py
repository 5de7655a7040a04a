# Tests package

