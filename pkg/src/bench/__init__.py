# bench package
