#include <json.hpp>
int main(){return 0;}
