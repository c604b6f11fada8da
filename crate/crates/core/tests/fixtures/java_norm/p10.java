public class Dispatcher {
    public static String route(int code) {
        switch (code) {
            case 1:
                return "north";
            case 2:
                return "south";
            case 3:
                return "east";
            default:
                return "hold";
        }
    }

    public static void main(String[] args) {
        System.out.println(route(2));
    }
}
