namespace emoji {}
